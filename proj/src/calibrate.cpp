#include "dflect/calibrate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dflect {

namespace {

// centered indicator disk sampled bilinearly at an offset of (dr, dc) pixels
std::vector<double> shifted_disk(double radius, double dr, double dc, int width,
                                 int height) {
    double cr = height / 2, cc = width / 2;
    auto inside = [&](double r, double c) {
        double yr = r - cr, xc = c - cc;
        return (yr * yr + xc * xc <= radius * radius) ? 1.0 : 0.0;
    };
    std::vector<double> out(static_cast<size_t>(width) * height, 0.0);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            double sr = r - dr, sc = c - dc;
            double fr = std::floor(sr), fc = std::floor(sc);
            double wr = sr - fr, wc = sc - fc;
            out[static_cast<size_t>(r) * width + c] =
                (1 - wr) * (1 - wc) * inside(fr, fc) +
                (1 - wr) * wc * inside(fr, fc + 1) +
                wr * (1 - wc) * inside(fr + 1, fc) + wr * wc * inside(fr + 1, fc + 1);
        }
    return out;
}

}  // namespace

NoiseEstimate fit_reference(const std::vector<double>& y_no, const SensingPlan& plan,
                            int width, int height, double pinhole_radius) {
    validate_plan(plan);
    if (plan.omega.size() != plan.order)
        throw std::invalid_argument("reference fit needs full sampling (M = N)");
    if (y_no.size() != plan.order)
        throw std::invalid_argument("measurement count does not match the plan");
    if (width <= 0 || height <= 0 ||
        static_cast<size_t>(width) * static_cast<size_t>(height) != plan.order)
        throw std::invalid_argument("grid shape does not match the plan order");
    if (!(pinhole_radius >= 1.0))
        throw std::invalid_argument("pinhole radius must be at least one pixel");
    // keep the shifted disk away from the boundary for every candidate
    if (2.0 * (pinhole_radius + 2.0) >= std::min(width, height))
        throw std::invalid_argument("pinhole disk does not fit inside the grid");

    double ynorm2 = 0.0;
    for (double v : y_no) ynorm2 += v * v;

    NoiseEstimate best;
    double best_residual2 = -1.0;
    for (int ir = -4; ir <= 4; ++ir) {
        for (int ic = -4; ic <= 4; ++ic) {
            double dr = 0.5 * ir, dc = 0.5 * ic;
            auto disk = shifted_disk(pinhole_radius, dr, dc, width, height);
            auto phid = apply_phi(disk, plan);
            double gram = 0.0, corr = 0.0;
            for (size_t i = 0; i < phid.size(); ++i) {
                gram += phid[i] * phid[i];
                corr += phid[i] * y_no[i];
            }
            double h = corr / gram;
            double residual2 = std::max(0.0, ynorm2 - 2.0 * h * corr + h * h * gram);
            if (best_residual2 < 0.0 || residual2 < best_residual2) {
                best_residual2 = residual2;
                best.disk_height = h;
                best.origin_offset = {dr, dc};
            }
        }
    }
    if (!(best.disk_height > 0.0))
        throw data_error("no-object fit produced a nonpositive disk height");
    best.eps_full = std::sqrt(best_residual2);
    return best;
}

double scale_epsilon(double eps_full, size_t m_count, size_t n_total) {
    if (eps_full < 0.0) throw std::invalid_argument("noise bound must be nonnegative");
    if (n_total == 0 || m_count < 1 || m_count > n_total)
        throw std::invalid_argument("measurement count " + std::to_string(m_count) +
                                    " outside [1, " + std::to_string(n_total) + "]");
    double m = static_cast<double>(m_count);
    return eps_full * std::sqrt(m + 2.0 * std::sqrt(m)) / std::sqrt(static_cast<double>(n_total));
}

}  // namespace dflect
