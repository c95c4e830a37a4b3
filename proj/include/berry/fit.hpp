#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace berry {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0; // RMS of fit residuals in y units
    std::size_t n = 0;
};

// Ordinary least squares y = intercept + slope * x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    f.n = x.size();
    if (f.n < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double n = static_cast<double>(f.n);
    const double det = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy * sxx - sx * sxy) / det;
    double ss = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.residual_rms = std::sqrt(ss / n);
    return f;
}

// Fit log10|err| = intercept + slope*log10(t); points with err <= floor are skipped.
inline LineFit fit_loglog(const std::vector<double>& t, const std::vector<double>& err,
                          double floor = 0.0) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (err[i] > floor && t[i] > 0.0) {
            lx.push_back(std::log10(t[i]));
            ly.push_back(std::log10(err[i]));
        }
    }
    return fit_line(lx, ly);
}

} // namespace berry
