#include "slnl/ablate.hpp"

#include <chrono>
#include <ostream>

namespace slnl {

AblationPlan ablation_plan_from_string(const std::string& s) {
  if (s == "loss") return AblationPlan::loss;
  if (s == "fa") return AblationPlan::fa;
  if (s == "slnl") return AblationPlan::slnl;
  fail("ablate: unknown plan '" + s + "' (expected loss, fa or slnl)");
}

namespace {

struct Cell {
  std::string label;
  ModelConfig cfg;
};

std::vector<Cell> plan_cells(AblationPlan plan, const ModelConfig& base) {
  std::vector<Cell> cells;
  switch (plan) {
    case AblationPlan::loss: {
      for (LossConfig loss : {LossConfig::ce(), LossConfig::fl(2.0), LossConfig::smce(0.4),
                              LossConfig::smfl(2.0, 0.4)}) {
        Cell c{loss.label(), base};
        c.cfg.loss = loss;
        cells.push_back(std::move(c));
      }
      break;
    }
    case AblationPlan::fa: {
      const std::pair<FAVariant, const char*> rows[] = {{FAVariant::none, "No FA"},
                                                        {FAVariant::afa, "Amplitude FA"},
                                                        {FAVariant::sfa, "Shared FA"},
                                                        {FAVariant::dfa, "Dependent FA"},
                                                        {FAVariant::rfa, "Residual FA (rFA)"}};
      for (auto [variant, label] : rows) {
        Cell c{label, base};
        c.cfg.attention = variant;
        cells.push_back(std::move(c));
      }
      break;
    }
    case AblationPlan::slnl: {
      const std::size_t blocks = base.blocks();
      for (std::size_t m1 = 0; m1 <= blocks; ++m1) {
        Cell c{"", base};
        c.cfg.m1 = m1;
        c.cfg.m2 = blocks - m1;
        c.label = (m1 == 0 ? std::string("Local") : std::string("SLnL")) + " (M1=" +
                  std::to_string(m1) + ", M2=" + std::to_string(blocks - m1) + ")";
        cells.push_back(std::move(c));
      }
      break;
    }
  }
  return cells;
}

}  // namespace

RunReport run_ablation(AblationPlan plan, const std::vector<SkeletonSequence>& train_set,
                       const std::vector<SkeletonSequence>& test_set,
                       const ModelConfig& base_model, const TrainConfig& base_train,
                       std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.command = "ablate";
  report.seed = base_train.seed;
  report.config = base_model.to_config();
  for (const auto& [k, v] : base_train.to_config()) report.config[k] = v;
  if (plan == AblationPlan::loss) report.table_extra_name = "margin_fraction_at_0.4";

  for (const Cell& cell : plan_cells(plan, base_model)) {
    if (log) (*log) << "ablate cell: " << cell.label << "\n";
    Model model(cell.cfg);
    train(model, train_set, nullptr, base_train, log);
    EvalResult ev = evaluate(model, test_set);
    AblationRow row;
    row.label = cell.label;
    row.accuracy = ev.accuracy;
    if (plan == AblationPlan::loss) row.extra = margin_fraction(model, test_set, 0.4);
    report.table.push_back(row);
    if (log) (*log) << "  accuracy " << ev.accuracy << "\n";
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace slnl
