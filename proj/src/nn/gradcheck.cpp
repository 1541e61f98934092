#include "aistk/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "aistk/errors.hpp"

namespace aistk::nn {

GradCheckReport gradient_check(const std::function<double()>& loss_fn,
                               std::span<const GradCheckEntry> entries, Rng& rng,
                               int samples_per_tensor, double epsilon, double denom_floor) {
    GradCheckReport report;
    for (const GradCheckEntry& e : entries) {
        if (!e.param->same_shape(*e.grad))
            throw ShapeError("gradient_check: grad shape mismatch for " + e.name);
        const std::int64_t n = e.param->size();
        if (n == 0) continue;
        const int samples = static_cast<int>(std::min<std::int64_t>(n, samples_per_tensor));
        for (int s = 0; s < samples; ++s) {
            const std::int64_t i =
                (n <= samples) ? s : static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(n)));
            const double saved = (*e.param)[i];
            (*e.param)[i] = saved + epsilon;
            const double lp = loss_fn();
            (*e.param)[i] = saved - epsilon;
            const double lm = loss_fn();
            (*e.param)[i] = saved;
            const double fd = (lp - lm) / (2.0 * epsilon);
            const double analytic = (*e.grad)[i];
            const double denom = std::max({std::abs(analytic), std::abs(fd), denom_floor});
            const double rel = std::abs(analytic - fd) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = e.name + "[" + std::to_string(i) + "]";
                report.worst_analytic = analytic;
                report.worst_fd = fd;
            }
        }
    }
    return report;
}

}  // namespace aistk::nn
