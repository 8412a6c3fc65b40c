#include "dflect/centroid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dflect {

namespace {

struct IntegerPeak {
    int row = 0, col = 0;  // signed translations
    double score = 0.0;
};

// dense cyclic correlation magnitudes, indexed [shift_row * width + shift_col]
std::vector<double> correlation_surface(const SpectrumGrid& s, const SpectrumGrid& t) {
    const int h = s.height, w = s.width;
    std::vector<double> scores(static_cast<size_t>(h) * w, 0.0);
    std::vector<int> trow(h);
    for (int a = 0; a < h; ++a) {
        for (int r = 0; r < h; ++r) trow[r] = (r - a + h) % h;
        for (int b = 0; b < w; ++b) {
            double dot = 0.0;
            for (int r = 0; r < h; ++r) {
                const double* srow = &s.values[static_cast<size_t>(r) * w];
                const double* tr = &t.values[static_cast<size_t>(trow[r]) * w];
                for (int c = b; c < w; ++c) dot += srow[c] * tr[c - b];
                for (int c = 0; c < b; ++c) dot += srow[c] * tr[c - b + w];
            }
            scores[static_cast<size_t>(a) * w + b] = std::abs(dot);
        }
    }
    return scores;
}

// signed scan order makes the tie break deterministic: the first strict
// maximum is the lexicographically smallest signed (row, col)
IntegerPeak signed_argmax(const std::vector<double>& scores, int h, int w) {
    IntegerPeak best;
    best.score = -1.0;
    for (int sa = -((h - 1) / 2); sa <= h / 2; ++sa) {
        int a = (sa % h + h) % h;
        for (int sb = -((w - 1) / 2); sb <= w / 2; ++sb) {
            int b = (sb % w + w) % w;
            double v = scores[static_cast<size_t>(a) * w + b];
            if (v > best.score) best = {sa, sb, v};
        }
    }
    return best;
}

// least-squares quadratic over the cyclic 3x3 neighborhood; the offset is
// zero whenever the fitted surface is not concave at the peak
std::array<double, 2> quadratic_offset(const std::vector<double>& scores, int h, int w,
                                       const IntegerPeak& peak) {
    double S = 0, Su = 0, Sv = 0, Suu = 0, Svv = 0, Suv = 0;
    for (int u = -1; u <= 1; ++u)
        for (int v = -1; v <= 1; ++v) {
            int a = ((peak.row + u) % h + h) % h;
            int b = ((peak.col + v) % w + w) % w;
            double m = scores[static_cast<size_t>(a) * w + b];
            S += m;
            Su += u * m;
            Sv += v * m;
            Suu += u * u * m;
            Svv += v * v * m;
            Suv += u * v * m;
        }
    double bu = Su / 6.0, bv = Sv / 6.0;
    double d = Suu / 2.0 - S / 3.0;
    double f = Svv / 2.0 - S / 3.0;
    double e = Suv / 4.0;
    double det = 4.0 * d * f - e * e;
    if (!(det > 0.0) || !(d < 0.0)) return {0.0, 0.0};
    double du = (e * bv - 2.0 * f * bu) / det;
    double dv = (e * bu - 2.0 * d * bv) / det;
    return {std::clamp(du, -0.5, 0.5), std::clamp(dv, -0.5, 0.5)};
}

CentroidEstimate run_search(const SpectrumGrid& s, const GaussianTemplate& tmpl,
                            CentroidMode mode) {
    if (s.width != tmpl.support.width || s.height != tmpl.support.height)
        throw std::invalid_argument("template shape does not match the spectrum");
    CentroidEstimate est;
    est.mode = mode;
    bool all_zero = true;
    for (double v : s.values)
        if (v != 0.0) {
            all_zero = false;
            break;
        }
    if (all_zero) return est;

    auto scores = correlation_surface(s, tmpl.support);
    auto peak = signed_argmax(scores, s.height, s.width);
    auto offset = quadratic_offset(scores, s.height, s.width, peak);
    est.tau = {peak.row + offset[0], peak.col + offset[1]};
    est.score = peak.score;
    est.has_feature = true;
    return est;
}

}  // namespace

GaussianTemplate make_template(int width, int height, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("template width must be positive");
    GaussianTemplate t;
    t.rho = rho;
    t.support = make_grid(width, height);
    double cr = height / 2, cc = width / 2;
    double inv = 1.0 / (2.0 * rho * rho);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            double dr = r - cr, dc = c - cc;
            t.support.at(r, c) = std::exp(-(dr * dr + dc * dc) * inv);
        }
    return t;
}

CentroidEstimate centroid_full(const SpectrumGrid& s, const GaussianTemplate& tmpl) {
    return run_search(s, tmpl, CentroidMode::full);
}

CentroidEstimate centroid_compressive(const MeasurementBundle& bundle,
                                      const SensingPlan& plan,
                                      const GaussianTemplate& tmpl) {
    const int w = tmpl.support.width, h = tmpl.support.height;
    if (plan.order != static_cast<size_t>(w) * static_cast<size_t>(h))
        throw std::invalid_argument("plan order does not match the template shape");
    std::vector<double> y;
    if (bundle.y_debiased.has_value()) {
        if (bundle.y_debiased->size() != bundle.y_biased.size() ||
            bundle.y_biased.size() != plan.omega.size())
            throw data_error("cached debiased measurements have the wrong size");
        double root = std::sqrt(static_cast<double>(plan.order));
        y.resize(bundle.y_debiased->size());
        for (size_t i = 0; i < y.size(); ++i) y[i] = (*bundle.y_debiased)[i] / root;
    } else {
        y = debias(bundle, plan);
    }
    auto back = make_grid(w, h);
    back.values = adjoint_phi(y, plan);
    return run_search(back, tmpl, CentroidMode::compressive);
}

double centroid_error(const CentroidEstimate& a, const CentroidEstimate& b) {
    if (!a.has_feature || !b.has_feature)
        throw data_error("centroid error is undefined for a no-feature estimate");
    double dr = a.tau[0] - b.tau[0], dc = a.tau[1] - b.tau[1];
    return std::sqrt(dr * dr + dc * dc);
}

double osnr(const SpectrumGrid& reference, const SpectrumGrid& estimate) {
    if (reference.width != estimate.width || reference.height != estimate.height)
        throw std::invalid_argument("spectra differ in shape");
    double nref = 0.0, ndiff = 0.0;
    for (size_t i = 0; i < reference.values.size(); ++i) {
        nref += reference.values[i] * reference.values[i];
        double d = reference.values[i] - estimate.values[i];
        ndiff += d * d;
    }
    if (!(nref > 0.0)) throw std::invalid_argument("reference spectrum has no energy");
    if (ndiff == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(nref / ndiff);
}

double isnr(const std::vector<double>& y_no, const SensingPlan& plan,
            const SpectrumGrid& s_no) {
    if (y_no.size() != plan.omega.size())
        throw std::invalid_argument("measurement count does not match the plan");
    auto phis = apply_phi(s_no.values, plan);
    double nsig = 0.0, ndiff = 0.0;
    for (size_t i = 0; i < phis.size(); ++i) {
        nsig += phis[i] * phis[i];
        double d = y_no[i] - phis[i];
        ndiff += d * d;
    }
    if (!(nsig > 0.0)) throw std::invalid_argument("no-object spectrum has no energy");
    if (ndiff == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(nsig / ndiff);
}

}  // namespace dflect
