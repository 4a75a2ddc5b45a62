#ifndef USMT_TRAINER_OPTIMIZER_HPP
#define USMT_TRAINER_OPTIMIZER_HPP

#include <vector>

#include "usmt/trainer/model.hpp"

namespace usmt {

// AdamW with decoupled weight decay, per-component learning rates and an
// optional global-norm gradient clip.
class AdamW {
  public:
    AdamW(std::vector<TaggedParam>& params, const OptimizerConfig& cfg);

    void zero_grad();
    // returns the pre-clip global gradient norm
    double step();

    double lr_for(ParamGroup g) const;

  private:
    std::vector<TaggedParam>* params_;
    OptimizerConfig cfg_;
    std::vector<Tensor> m_, v_;
    int64_t t_ = 0;
};

}  // namespace usmt

#endif
