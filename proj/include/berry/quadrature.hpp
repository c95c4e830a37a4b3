#pragma once

#include <cstddef>
#include <vector>

#include "berry/errors.hpp"

namespace berry {

// Composite Simpson on a uniform grid of n+1 samples (n even).
template <class T>
T simpson(const std::vector<T>& f, double h) {
    const std::size_t n = f.size() - 1;
    if (n < 2 || n % 2 != 0)
        throw NumericalError("simpson requires an even number of uniform intervals");
    T acc = f[0] + f[n];
    for (std::size_t i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f[i];
    return acc * (h / 3.0);
}

// Cumulative integral on a uniform grid; out[g] = integral from x0 to x_g.
// Per-interval 3-point rule (exact for quadratics), mirrored on the last
// interval, so the cumulative error is O(h^3) globally.
template <class T>
std::vector<T> cumulative(const std::vector<T>& f, double h) {
    const std::size_t n = f.size();
    std::vector<T> out(n);
    if (n == 0) return out;
    out[0] = T(0);
    if (n == 1) return out;
    for (std::size_t g = 0; g + 1 < n; ++g) {
        T inc;
        if (g + 2 < n)
            inc = (h / 12.0) * (5.0 * f[g] + 8.0 * f[g + 1] - f[g + 2]);
        else
            inc = (h / 12.0) * (-f[g - 1] + 8.0 * f[g] + 5.0 * f[g + 1]);
        out[g + 1] = out[g] + inc;
    }
    return out;
}

} // namespace berry
