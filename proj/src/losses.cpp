#include "propseg/losses.hpp"

#include <stdexcept>

namespace propseg {

void validate_loss_config(const LossConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) {
    throw std::invalid_argument("LossConfig: alpha must lie in [0,1]");
  }
  if (!(cfg.bce_epsilon > 0.0 && cfg.bce_epsilon < 1e-3)) {
    throw std::invalid_argument("LossConfig: bce_epsilon must lie in (0, 1e-3)");
  }
}

double loss_sp(const std::vector<ProportionVector>& pred,
               const std::vector<ProportionVector>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw std::invalid_argument("loss_sp: batches must be non-empty and of equal length");
  }
  const Eigen::Index c = pred.front().values.size();
  Eigen::MatrixXd p(c, static_cast<Eigen::Index>(pred.size()));
  Eigen::MatrixXd t(c, static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].values.size() != c || target[i].values.size() != c) {
      throw std::invalid_argument("loss_sp: class counts differ across the batch");
    }
    p.col(static_cast<Eigen::Index>(i)) = pred[i].values;
    t.col(static_cast<Eigen::Index>(i)) = target[i].values;
  }
  return loss_sp<double>(p, t);
}

}  // namespace propseg
