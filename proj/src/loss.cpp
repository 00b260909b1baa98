#include "tdjunta/loss.hpp"

#include <stdexcept>

namespace tdj {

void TdParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("TdParams: alpha must lie in [0,1]");
}

double td_loss(const TdParams& params, double y_prev, double y_next, double yhat_prev, double yhat_next) {
    const double inc = (y_next - y_prev) - (yhat_next - yhat_prev);
    const double point = y_next - yhat_next;
    return 0.5 * params.alpha * inc * inc + 0.5 * (1.0 - params.alpha) * point * point;
}

OutputGrads td_loss_output_grads(const TdParams& params, double y_prev, double y_next, double yhat_prev,
                                 double yhat_next) {
    const double inc = (y_next - y_prev) - (yhat_next - yhat_prev);
    const double point = y_next - yhat_next;
    return {params.alpha * inc, -params.alpha * inc - (1.0 - params.alpha) * point};
}

}  // namespace tdj
