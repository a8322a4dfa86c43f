#include "art/rng.hpp"

#include <cmath>

namespace art {

double Rng::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

double Rng::truncated_normal(double stddev) {
    double z = 0.0;
    do {
        z = next_normal();
    } while (std::abs(z) > 2.0);
    return z * stddev;
}

}  // namespace art
