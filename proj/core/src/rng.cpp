#include "ki/rng.hpp"

namespace ki {

double Rng::normal() {
    // Box-Muller, one sample per call; the sine partner is discarded so the
    // stream layout stays independent of call history.
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double Rng::truncated_normal(double stddev, double cutoff_sigmas) {
    double z = normal();
    while (std::fabs(z) > cutoff_sigmas) z = normal();
    return z * stddev;
}

}  // namespace ki
