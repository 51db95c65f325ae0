#pragma once

// Scalar reference implementations written directly from the formulas with
// plain loops over std::vector. They share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "muse/model.hpp"
#include "muse/tensor.hpp"

namespace muse::oracle {

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

inline Mat of(const Tensor& t) {
  Mat m(t.rows(), t.cols());
  const auto d = t.data();
  std::copy(d.begin(), d.end(), m.v.begin());
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

// Adds a 1 x cols bias row to every row.
inline Mat add_bias(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) a(i, j) += b(0, j);
  return a;
}

inline Mat relu(Mat a) {
  for (auto& x : a.v) x = x > 0.0 ? x : 0.0;
  return a;
}

inline double cosine(const Mat& a, std::size_t i, const Mat& b, std::size_t j) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t c = 0; c < a.cols; ++c) {
    dot += a(i, c) * b(j, c);
    na += a(i, c) * a(i, c);
    nb += b(j, c) * b(j, c);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// -log( e^{cos(u_i, v_i)/tau} / (sum_{j != i} e^{cos(u_i, u_j)/tau} + sum_j e^{cos(u_i, v_j)/tau}) )
// Summed in long double, whose range covers e^{1/tau} down to tau = 1e-3.
inline double ntxent(const Mat& u, const Mat& v, std::size_t i, double tau) {
  long double denom = 0.0L;
  const long double t = tau;
  for (std::size_t j = 0; j < u.rows; ++j) {
    if (j != i) denom += std::exp(cosine(u, i, u, j) / t);
    denom += std::exp(cosine(u, i, v, j) / t);
  }
  return static_cast<double>(-(cosine(u, i, v, i) / t - std::log(denom)));
}

inline double view_loss(const Mat& z, const Mat& z_aug, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows; ++i) total += ntxent(z, z_aug, i, tau) + ntxent(z_aug, z, i, tau);
  return total / (2.0 * static_cast<double>(z.rows));
}

// Dense D^-1/2 (A + I) D^-1/2 from an undirected edge list.
inline Mat normalized_adjacency(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Mat a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  for (auto [u, v] : edges) {
    if (u == v) continue;
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) /= std::sqrt(deg[i] * deg[j]);
  return a;
}

struct Params {
  Mat enc_w1, enc_w2, proj_w1, proj_b1, proj_w2, proj_b2;
  Mat fs_w, fs_b, fc_w, fc_b, c_w1, c_b1, c_w2, c_b2;
};

inline Params of(const ModelParams& p) {
  return {of(p.enc_w1),     of(p.enc_w2),     of(p.proj_w1),    of(p.proj_b1), of(p.proj_w2),
          of(p.proj_b2),    of(p.filter_s_w), of(p.filter_s_b), of(p.filter_c_w), of(p.filter_c_b),
          of(p.ctrl_w1),    of(p.ctrl_b1),    of(p.ctrl_w2),    of(p.ctrl_b2)};
}

inline Mat encode_semantic(const Params& p, const Mat& x) { return matmul(relu(matmul(x, p.enc_w1)), p.enc_w2); }

inline Mat encode_contextual(const Params& p, const Mat& x, const Mat& adj) {
  return matmul(adj, matmul(relu(matmul(adj, matmul(x, p.enc_w1))), p.enc_w2));
}

inline Mat project(const Params& p, const Mat& h) {
  return add_bias(matmul(relu(add_bias(matmul(h, p.proj_w1), p.proj_b1)), p.proj_w2), p.proj_b2);
}

// log(1 + degree), standardised with the population deviation (zeros when constant).
inline std::vector<double> degree_feature(const std::vector<std::size_t>& degree) {
  const double n = static_cast<double>(degree.size());
  std::vector<double> f;
  for (auto d : degree) f.push_back(std::log(1.0 + static_cast<double>(d)));
  double mu = 0.0;
  for (double x : f) mu += x / n;
  double var = 0.0;
  for (double x : f) var += (x - mu) * (x - mu) / n;
  for (double& x : f) x = var < 1e-24 ? 0.0 : (x - mu) / std::sqrt(var);
  return f;
}

inline std::vector<double> lambda(const Params& p, const Mat& h_s, const Mat& h_c, const std::vector<double>& deg) {
  const Mat ws = relu(add_bias(matmul(h_s, p.fs_w), p.fs_b));
  const Mat wc = relu(add_bias(matmul(h_c, p.fc_w), p.fc_b));
  Mat input(h_s.rows, ws.cols + wc.cols + 1);
  for (std::size_t i = 0; i < h_s.rows; ++i) {
    for (std::size_t j = 0; j < ws.cols; ++j) input(i, j) = ws(i, j);
    for (std::size_t j = 0; j < wc.cols; ++j) input(i, ws.cols + j) = wc(i, j);
    input(i, ws.cols + wc.cols) = deg[i];
  }
  const Mat out = add_bias(matmul(relu(add_bias(matmul(input, p.c_w1), p.c_b1)), p.c_w2), p.c_b2);
  std::vector<double> lam(h_s.rows);
  for (std::size_t i = 0; i < h_s.rows; ++i) lam[i] = 1.0 / (1.0 + std::exp(-out(i, 0)));
  return lam;
}

inline Mat fuse(const Mat& h_s, const Mat& h_c, const std::vector<double>& lam) {
  Mat f = h_s;
  for (std::size_t i = 0; i < f.rows; ++i)
    for (std::size_t j = 0; j < f.cols; ++j) f(i, j) += lam[i] * h_c(i, j);
  return f;
}

struct Views {
  Mat h_s, h_s_aug, h_c, h_c_aug, h_f, h_f_aug;
};

inline double contrast_loss(const Params& p, const Views& e, double tau, double beta1, double beta2, bool sem = true,
                            bool ctx = true, bool fus = true) {
  double total = 0.0;
  if (sem) total += view_loss(project(p, e.h_s), project(p, e.h_s_aug), tau);
  if (ctx) total += beta1 * view_loss(project(p, e.h_c), project(p, e.h_c_aug), tau);
  if (fus) total += beta2 * view_loss(project(p, e.h_f), project(p, e.h_f_aug), tau);
  return total;
}

inline double controller_loss(const std::vector<double>& lam, const Mat& h_s, const Mat& h_c, double alpha1,
                              double alpha2, double epsilon) {
  double sim = 0.0, sq = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < lam.size(); ++i) {
    sim += lam[i] * cosine(h_s, i, h_c, i);
    sq += lam[i] * lam[i];
    mean += lam[i] / static_cast<double>(lam.size());
  }
  return sim + alpha1 * std::sqrt(sq) + alpha2 * std::abs(mean - epsilon);
}

// Central differences of f with respect to every entry of `param`, which f reads through the tensor's storage.
inline std::vector<double> numeric_gradient(Tensor& param, const std::function<double()>& f, double h = 1e-5) {
  auto data = param.mutable_data();
  std::vector<double> g(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double saved = data[k];
    data[k] = saved + h;
    const double up = f();
    data[k] = saved - h;
    const double down = f();
    data[k] = saved;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor for near-zero gradients.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Number of 2-element subsets.
inline double pairs(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace muse::oracle
