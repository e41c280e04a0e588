#pragma once

// Direct 2D-window SSIM in double precision over every valid window center, channel-averaged.
// Written without the library's separable filtering so the two can check each other.

#include <cmath>

#include "relux/image.hpp"

namespace relux::testing {

inline double reference_ssim(const Image& a, const Image& b) {
    const int r = 5;
    double g[11][11];
    double gs = 0;
    for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) gs += g[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * 1.5 * 1.5));
    for (auto& row : g)
        for (double& v : row) v /= gs;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    int count = 0;
    for (int c = 0; c < 3; ++c) {
        for (int y = r; y < a.height() - r; ++y) {
            for (int x = r; x < a.width() - r; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = -r; i <= r; ++i)
                    for (int j = -r; j <= r; ++j) {
                        const double w = g[i + r][j + r];
                        const double va = a.at(x + j, y + i, c), vb = b.at(x + j, y + i, c);
                        ma += w * va;
                        mb += w * vb;
                        saa += w * va * va;
                        sbb += w * vb * vb;
                        sab += w * va * vb;
                    }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        }
    }
    return total / count;
}

}  // namespace relux::testing
