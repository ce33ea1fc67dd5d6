#pragma once

// Straight-loop reference implementations shared by unit and acceptance tests.

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "echo/nn.hpp"
#include "echo/ops.hpp"

namespace echo::oracle {

/// Strided 3D convolution with explicit zero padding; x [T,H,W,Cin], w [kt,kh,kw,Cin,Cout].
inline Tensor<double> conv3d(const Tensor<double>& x, const Tensor<double>& w, const ConvGeometry& g) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  std::array<std::int64_t, 3> out{};
  for (int a = 0; a < 3; ++a) out[static_cast<std::size_t>(a)] = (xs[static_cast<std::size_t>(a)] + g.pad_front[a] + g.pad_back[a] - g.kernel[a]) / g.stride[a] + 1;
  Tensor<double> y(Shape{out[0], out[1], out[2], ws[4]});
  for (std::int64_t t = 0; t < out[0]; ++t)
    for (std::int64_t h = 0; h < out[1]; ++h)
      for (std::int64_t v = 0; v < out[2]; ++v)
        for (std::int64_t o = 0; o < ws[4]; ++o) {
          double acc = 0;
          for (std::int64_t a = 0; a < ws[0]; ++a)
            for (std::int64_t b = 0; b < ws[1]; ++b)
              for (std::int64_t c = 0; c < ws[2]; ++c)
                for (std::int64_t i = 0; i < ws[3]; ++i) {
                  const std::int64_t ti = t * g.stride[0] + a - g.pad_front[0];
                  const std::int64_t hi = h * g.stride[1] + b - g.pad_front[1];
                  const std::int64_t vi = v * g.stride[2] + c - g.pad_front[2];
                  if (ti < 0 || hi < 0 || vi < 0 || ti >= xs[0] || hi >= xs[1] || vi >= xs[2]) continue;
                  acc += x[((ti * xs[1] + hi) * xs[2] + vi) * xs[3] + i] *
                         w[(((a * ws[1] + b) * ws[2] + c) * ws[3] + i) * ws[4] + o];
                }
          y[((t * out[1] + h) * out[2] + v) * ws[4] + o] = acc;
        }
  return y;
}

/// Forward pass of the GELU MLP stored under `prefix` ("<prefix>.<i>.w/b").
inline std::vector<double> mlp(const ParamStore<double>& store, const std::string& prefix, std::vector<double> x) {
  for (int layer = 0; store.contains(prefix + "." + std::to_string(layer) + ".w"); ++layer) {
    const auto& w = store.get(prefix + "." + std::to_string(layer) + ".w").value();
    const auto& b = store.get(prefix + "." + std::to_string(layer) + ".b").value();
    const auto in = w.dim(0), out = w.dim(1);
    std::vector<double> y(static_cast<std::size_t>(out));
    for (std::int64_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::int64_t i = 0; i < in; ++i) acc += x[static_cast<std::size_t>(i)] * w[i * out + o];
      y[static_cast<std::size_t>(o)] = acc;
    }
    if (store.contains(prefix + "." + std::to_string(layer + 1) + ".w"))
      for (auto& v : y) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    x = std::move(y);
  }
  return x;
}

/// Continuous convolution by direct double loop over (query, source) with the
/// box receptive field. kernel(offset) returns C_in·C_out values, row-major [i][o].
inline std::vector<double> contconv(const std::vector<double>& src, const std::vector<double>& values, std::int64_t cin,
                                    const std::vector<double>& queries, std::int64_t cout, int dim, double radius,
                                    bool density, const std::function<std::vector<double>(const std::vector<double>&)>& kernel) {
  const auto ns = static_cast<std::int64_t>(src.size()) / dim;
  const auto nq = static_cast<std::int64_t>(queries.size()) / dim;
  std::vector<double> out(static_cast<std::size_t>(nq * cout), 0.0);
  for (std::int64_t q = 0; q < nq; ++q) {
    double total = 0;
    std::vector<double> acc(static_cast<std::size_t>(cout), 0.0);
    for (std::int64_t p = 0; p < ns; ++p) {
      std::vector<double> off(static_cast<std::size_t>(dim));
      double d2 = 0;
      bool inside = true;
      for (int a = 0; a < dim; ++a) {
        off[static_cast<std::size_t>(a)] = queries[static_cast<std::size_t>(q * dim + a)] - src[static_cast<std::size_t>(p * dim + a)];
        inside = inside && std::abs(off[static_cast<std::size_t>(a)]) <= radius;
        d2 += off[static_cast<std::size_t>(a)] * off[static_cast<std::size_t>(a)];
      }
      if (!inside) continue;
      const double w = density ? std::exp(-d2 / (radius * radius)) : 1.0;
      total += w;
      const auto k = kernel(off);
      for (std::int64_t o = 0; o < cout; ++o)
        for (std::int64_t i = 0; i < cin; ++i)
          acc[static_cast<std::size_t>(o)] += w * values[static_cast<std::size_t>(p * cin + i)] * k[static_cast<std::size_t>(i * cout + o)];
    }
    for (std::int64_t o = 0; o < cout; ++o)
      out[static_cast<std::size_t>(q * cout + o)] = density && total > 0 ? acc[static_cast<std::size_t>(o)] / total : acc[static_cast<std::size_t>(o)];
  }
  return out;
}

/// ‖pred − truth‖₂ / ‖truth‖₂ by plain accumulation.
inline double relative_mse(const std::vector<double>& pred, const std::vector<double>& truth) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  return std::sqrt(num) / std::sqrt(den);
}

/// Gray-Scott explicit step written directly from the PDE on a periodic grid.
inline void gray_scott_step(std::vector<double>& a, std::vector<double>& b, std::int64_t n, double h, double da, double db,
                            double f, double k, double dt) {
  auto at = [n](const std::vector<double>& u, std::int64_t i, std::int64_t j) {
    if (i < 0) i += n;
    if (i >= n) i -= n;
    if (j < 0) j += n;
    if (j >= n) j -= n;
    return u[static_cast<std::size_t>(i * n + j)];
  };
  std::vector<double> a2(a.size()), b2(b.size());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      const double ac = at(a, i, j), bc = at(b, i, j);
      const double la = (at(a, i + 1, j) + at(a, i - 1, j) + at(a, i, j + 1) + at(a, i, j - 1) - 4 * ac) / (h * h);
      const double lb = (at(b, i + 1, j) + at(b, i - 1, j) + at(b, i, j + 1) + at(b, i, j - 1) - 4 * bc) / (h * h);
      a2[static_cast<std::size_t>(i * n + j)] = ac + dt * (da * la - ac * bc * bc + f * (1 - ac));
      b2[static_cast<std::size_t>(i * n + j)] = bc + dt * (db * lb + ac * bc * bc - (f + k) * bc);
    }
  a = a2;
  b = b2;
}

}  // namespace echo::oracle
