#pragma once

namespace tdj {

/// Temporal-difference weight alpha in [0, 1]; alpha = 0 is the square loss.
struct TdParams {
    double alpha = 0.9;

    /// Throws std::invalid_argument outside [0, 1].
    void validate() const;
};

/// (alpha/2)(dy - dyhat)^2 + ((1-alpha)/2)(y_next - yhat_next)^2 with
/// dy = y_next - y_prev and dyhat = yhat_next - yhat_prev.
double td_loss(const TdParams& params, double y_prev, double y_next, double yhat_prev, double yhat_next);

/// Half squared error; identical to td_loss with alpha = 0.
inline double square_loss(double y, double yhat) {
    const double r = y - yhat;
    return 0.5 * r * r;
}

struct OutputGrads {
    double g_prev = 0.0;
    double g_next = 0.0;
};

/// Partial derivatives of td_loss with respect to yhat_prev and yhat_next.
OutputGrads td_loss_output_grads(const TdParams& params, double y_prev, double y_next, double yhat_prev,
                                 double yhat_next);

}  // namespace tdj
