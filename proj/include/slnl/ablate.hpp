#pragma once

#include "slnl/report.hpp"

namespace slnl {

enum class AblationPlan { loss, fa, slnl };

AblationPlan ablation_plan_from_string(const std::string& s);

/// Runs one training + evaluation matrix with a shared seed and returns the
/// accuracy table. loss: CE / FL(2,) / SMCE(,0.4) / SMFL(2,0.4) with margin
/// fractions as the extra column. fa: no-FA and the four attention variants.
/// slnl: the (m1, m2) split sweep over the configured block count.
RunReport run_ablation(AblationPlan plan, const std::vector<SkeletonSequence>& train_set,
                       const std::vector<SkeletonSequence>& test_set,
                       const ModelConfig& base_model, const TrainConfig& base_train,
                       std::ostream* log = nullptr);

}  // namespace slnl
