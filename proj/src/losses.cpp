#include "muse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "muse/errors.hpp"
#include "muse/kernels.hpp"
#include "muse/ops.hpp"

namespace muse {

void ContrastConfig::validate() const {
  if (!(tau > 0.0)) throw ContractError("tau must be positive");
  if (beta1 < 0.0 || beta2 < 0.0) throw ContractError("beta1 and beta2 must be non-negative");
  if (!semantic && !contextual && !fusion) throw ContractError("all contrast terms disabled");
}

void ControllerConfig::validate() const {
  if (alpha1 < 0.0 || alpha2 < 0.0) throw ContractError("alpha1 and alpha2 must be non-negative");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractError("epsilon must lie in [0, 1]");
}

namespace {

// Unit rows (zero rows stay zero) and the original norms.
std::vector<double> normalize_rows(std::span<const double> x, std::size_t rows, std::size_t cols,
                                   std::vector<double>& norms) {
  std::vector<double> out(x.begin(), x.end());
  norms.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += x[r * cols + c] * x[r * cols + c];
    norms[r] = std::sqrt(ss);
    const double inv = norms[r] < kCosineEps ? 0.0 : 1.0 / norms[r];
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] *= inv;
  }
  return out;
}

// d/dz of a function of z/||z||, given the gradient w.r.t. the unit rows.
std::vector<double> unnormalize_grad(const std::vector<double>& unit, const std::vector<double>& norms,
                                     const std::vector<double>& grad_unit, std::size_t rows, std::size_t cols) {
  std::vector<double> g(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (norms[r] < kCosineEps) continue;
    double proj = 0.0;
    for (std::size_t c = 0; c < cols; ++c) proj += unit[r * cols + c] * grad_unit[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c) {
      g[r * cols + c] = (grad_unit[r * cols + c] - unit[r * cols + c] * proj) / norms[r];
    }
  }
  return g;
}

// e = exp((a b^T - 1) / tau) with row sums. Cosines are at most 1, so 1/tau
// bounds every logit and each entry lies in (0, 1]. The diagonal is zeroed
// first when the self pair is excluded.
template <typename S>
void shifted_exp_similarity(const S* a, const S* b, std::size_t n, std::size_t d, double tau,
                            bool skip_diagonal, std::vector<S>& e, std::vector<double>& sums) {
  e.resize(n * n);
  sums.resize(n);
  kernels::gemm(kernels::Trans::no, kernels::Trans::yes, n, n, d, a, d, b, d, S(0), e.data(), n);
  if (skip_diagonal) {
    for (std::size_t i = 0; i < n; ++i) e[i * n + i] = -std::numeric_limits<S>::infinity();
  }
  kernels::exp_affine_rows(e.data(), n, n, 1.0 / tau, -1.0 / tau, sums.data());
}

// The three N x N exp matrices are reused across calls on a thread so
// large graphs do not pay for fresh page mappings every step.
template <typename S>
struct ViewWorkspace {
  std::vector<S> e_aa, e_ab, e_bb;
};

template <typename S>
ViewWorkspace<S>& workspace() {
  thread_local ViewWorkspace<S> ws;
  return ws;
}

template <typename S>
std::vector<double> col_sums(const std::vector<S>& m, std::size_t n) {
  constexpr std::size_t kBlock = 512;
  std::vector<double> s(n, 0.0);
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static) if (n > 1024)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t j0 = blk * kBlock, j1 = std::min(n, j0 + kBlock);
    for (std::size_t i = 0; i < n; ++i) {
      const S* row = m.data() + i * n;
#pragma omp simd
      for (std::size_t j = j0; j < j1; ++j) s[j] += row[j];
    }
  }
  return s;
}

// g_ua = (G_aa ua + G_ab ub) / tau,  g_ub = (G_bb ub + G_ab^T ua) / tau.
void unit_gradients(const std::vector<double>& g_aa, const std::vector<double>& g_ab, const std::vector<double>& g_bb,
                    const std::vector<double>& ua, const std::vector<double>& ub, std::size_t n, std::size_t d,
                    double tau, std::vector<double>& g_ua, std::vector<double>& g_ub) {
  using kernels::Trans;
  g_ua.assign(n * d, 0.0);
  g_ub.assign(n * d, 0.0);
  kernels::gemm(Trans::no, Trans::no, n, d, n, g_aa.data(), n, ua.data(), d, 0.0, g_ua.data(), d);
  kernels::gemm(Trans::no, Trans::no, n, d, n, g_ab.data(), n, ub.data(), d, 1.0, g_ua.data(), d);
  kernels::gemm(Trans::no, Trans::no, n, d, n, g_bb.data(), n, ub.data(), d, 0.0, g_ub.data(), d);
  kernels::gemm(Trans::yes, Trans::no, n, d, n, g_ab.data(), n, ua.data(), d, 1.0, g_ub.data(), d);
  const double inv_tau = 1.0 / tau;
  for (auto& v : g_ua) v *= inv_tau;
  for (auto& v : g_ub) v *= inv_tau;
}

// Below this a denominator built with the 1/tau shift has lost its largest
// terms to underflow. Float entries underflow far sooner than doubles.
template <typename S>
constexpr double kMinSharedDenominator = std::is_same_v<S, float> ? 1e-25 : 1e-200;

template <typename S>
std::vector<S> narrowed(const std::vector<double>& v) {
  return std::vector<S>(v.begin(), v.end());
}

// One shift of 1/tau for every anchor, so each exp matrix serves both the
// row anchor and the column anchor. S is the storage type of the N x N
// matrices; sums, logs and the positive term stay in double. Returns false
// when some denominator underflowed and the row-shifted path must be used
// instead.
template <typename S>
bool fused_view_loss(const std::vector<double>& ua, const std::vector<double>& ub, std::size_t n, std::size_t d,
                     double tau, bool need_grad, double& value, std::vector<double>& g_ua, std::vector<double>& g_ub) {
  std::vector<S> ua_s, ub_s;
  const S* pa;
  const S* pb;
  if constexpr (std::is_same_v<S, double>) {
    pa = ua.data();
    pb = ub.data();
  } else {
    ua_s = narrowed<S>(ua);
    ub_s = narrowed<S>(ub);
    pa = ua_s.data();
    pb = ub_s.data();
  }
  // aa / bb: intra-view (self term excluded), ab: cross-view.
  ViewWorkspace<S>& ws = workspace<S>();
  std::vector<S>& e_aa = ws.e_aa;
  std::vector<S>& e_ab = ws.e_ab;
  std::vector<S>& e_bb = ws.e_bb;
  std::vector<double> rs_aa, rs_ab, rs_bb;
  shifted_exp_similarity(pa, pa, n, d, tau, true, e_aa, rs_aa);
  shifted_exp_similarity(pa, pb, n, d, tau, false, e_ab, rs_ab);
  shifted_exp_similarity(pb, pb, n, d, tau, true, e_bb, rs_bb);
  const std::vector<double> cs_ab = col_sums(e_ab, n);

  std::vector<double> denom_a(n), denom_b(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    denom_a[i] = rs_aa[i] + rs_ab[i];
    denom_b[i] = rs_bb[i] + cs_ab[i];
    if (!(denom_a[i] > kMinSharedDenominator<S> && denom_b[i] > kMinSharedDenominator<S>)) return false;
    double pos = 0.0;
    for (std::size_t c = 0; c < d; ++c) pos += ua[i * d + c] * ub[i * d + c];
    const double shifted_pos = (pos - 1.0) / tau;
    total += -2.0 * shifted_pos + std::log(denom_a[i]) + std::log(denom_b[i]);
  }
  const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
  value = total * inv_2n;
  if (!need_grad) return true;

  // d loss / d S[i, j] = E[i, j] * (w_row[i] + w_col[j]), minus 2 * inv_2n on
  // the cross-view diagonal; the weights are applied while packing.
  std::vector<S> wa(n), wb(n);
  for (std::size_t i = 0; i < n; ++i) {
    wa[i] = static_cast<S>(inv_2n / denom_a[i]);
    wb[i] = static_cast<S>(inv_2n / denom_b[i]);
  }
  using kernels::Trans;
  std::vector<S> ga(n * d), gb(n * d);
  kernels::gemm_scaled_a(Trans::no, Trans::no, n, d, n, e_aa.data(), n, wa.data(), wa.data(), pa, d, S(0),
                         ga.data(), d);
  kernels::gemm_scaled_a(Trans::no, Trans::no, n, d, n, e_ab.data(), n, wa.data(), wb.data(), pb, d, S(1),
                         ga.data(), d);
  kernels::gemm_scaled_a(Trans::no, Trans::no, n, d, n, e_bb.data(), n, wb.data(), wb.data(), pb, d, S(0),
                         gb.data(), d);
  kernels::gemm_scaled_a(Trans::yes, Trans::no, n, d, n, e_ab.data(), n, wb.data(), wa.data(), pa, d, S(1),
                         gb.data(), d);
  const double inv_tau = 1.0 / tau;
  g_ua.resize(n * d);
  g_ub.resize(n * d);
  for (std::size_t k = 0; k < n * d; ++k) {
    g_ua[k] = (static_cast<double>(ga[k]) - 2.0 * inv_2n * ub[k]) * inv_tau;
    g_ub[k] = (static_cast<double>(gb[k]) - 2.0 * inv_2n * ua[k]) * inv_tau;
  }
  return true;
}

// Each anchor shifted by its own largest logit. Handles any tau > 0.
void row_shifted_view_loss(const std::vector<double>& ua, const std::vector<double>& ub, std::size_t n, std::size_t d,
                           double tau, bool need_grad, double& value, std::vector<double>& g_ua,
                           std::vector<double>& g_ub) {
  using kernels::Trans;
  std::vector<double> s_aa(n * n), s_ab(n * n), s_bb(n * n);
  kernels::gemm(Trans::no, Trans::yes, n, n, d, ua.data(), d, ua.data(), d, 0.0, s_aa.data(), n);
  kernels::gemm(Trans::no, Trans::yes, n, n, d, ua.data(), d, ub.data(), d, 0.0, s_ab.data(), n);
  kernels::gemm(Trans::no, Trans::yes, n, n, d, ub.data(), d, ub.data(), d, 0.0, s_bb.data(), n);
  const double lowest = -std::numeric_limits<double>::infinity();
  std::vector<double> m_a(n, lowest), m_b(n, lowest);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) m_a[i] = std::max(m_a[i], s_aa[i * n + j]);
      if (j != i) m_b[i] = std::max(m_b[i], s_bb[i * n + j]);
      m_a[i] = std::max(m_a[i], s_ab[i * n + j]);
      m_b[j] = std::max(m_b[j], s_ab[i * n + j]);
    }
  }
  auto shifted = [tau](double s, double m) { return std::exp((s - m) / tau); };
  std::vector<double> denom_a(n, 0.0), denom_b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) denom_a[i] += shifted(s_aa[i * n + j], m_a[i]);
      if (j != i) denom_b[i] += shifted(s_bb[i * n + j], m_b[i]);
      denom_a[i] += shifted(s_ab[i * n + j], m_a[i]);
      denom_b[j] += shifted(s_ab[i * n + j], m_b[j]);
    }
  }
  const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = s_ab[i * n + i];
    total += -(pos - m_a[i]) / tau + std::log(denom_a[i]) - (pos - m_b[i]) / tau + std::log(denom_b[i]);
  }
  value = total * inv_2n;
  if (!need_grad) return;

  std::vector<double> g_aa(n * n, 0.0), g_ab(n * n), g_bb(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) {
        g_aa[i * n + j] = inv_2n * (shifted(s_aa[i * n + j], m_a[i]) / denom_a[i] +
                                    shifted(s_aa[i * n + j], m_a[j]) / denom_a[j]);
        g_bb[i * n + j] = inv_2n * (shifted(s_bb[i * n + j], m_b[i]) / denom_b[i] +
                                    shifted(s_bb[i * n + j], m_b[j]) / denom_b[j]);
      }
      g_ab[i * n + j] = inv_2n * (shifted(s_ab[i * n + j], m_a[i]) / denom_a[i] +
                                  shifted(s_ab[i * n + j], m_b[j]) / denom_b[j]);
    }
    g_ab[i * n + i] -= 2.0 * inv_2n;
  }
  unit_gradients(g_aa, g_ab, g_bb, ua, ub, n, d, tau, g_ua, g_ub);
}

}  // namespace

double ntxent_pair_loss(const Tensor& z, const Tensor& z_aug, std::size_t i, double tau) {
  if (z.rows() != z_aug.rows() || z.cols() != z_aug.cols()) {
    throw ShapeError("ntxent_pair_loss: " + z.shape_string() + " vs " + z_aug.shape_string());
  }
  const std::size_t n = z.rows(), d = z.cols();
  if (n < 2) throw ContractError("ntxent_pair_loss needs at least 2 nodes");
  if (i >= n) throw ContractError("ntxent_pair_loss: anchor index out of range");
  if (!(tau > 0.0)) throw ContractError("tau must be positive");
  const auto a = z.data();
  const auto b = z_aug.data();
  auto cosine = [d](const double* x, const double* y) {
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += x[c] * y[c];
      nx += x[c] * x[c];
      ny += y[c] * y[c];
    }
    nx = std::sqrt(nx);
    ny = std::sqrt(ny);
    return (nx < kCosineEps || ny < kCosineEps) ? 0.0 : dot / (nx * ny);
  };
  const double* anchor = a.data() + i * d;
  std::vector<double> logits;
  logits.reserve(2 * n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) logits.push_back(cosine(anchor, a.data() + j * d) / tau);
  }
  for (std::size_t j = 0; j < n; ++j) logits.push_back(cosine(anchor, b.data() + j * d) / tau);
  const double positive = cosine(anchor, b.data() + i * d) / tau;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - mx);
  return -(positive - mx - std::log(denom));
}

Tensor view_loss(const Tensor& z, const Tensor& z_aug, double tau, Precision precision) {
  if (z.rows() != z_aug.rows() || z.cols() != z_aug.cols()) {
    throw ShapeError("view_loss: " + z.shape_string() + " vs " + z_aug.shape_string());
  }
  const std::size_t n = z.rows(), d = z.cols();
  if (n < 2) throw ContractError("view_loss needs at least 2 nodes");
  if (!(tau > 0.0)) throw ContractError("tau must be positive");

  std::vector<double> norm_a, norm_b;
  const std::vector<double> ua = normalize_rows(z.data(), n, d, norm_a);
  const std::vector<double> ub = normalize_rows(z_aug.data(), n, d, norm_b);

  double value = 0.0;
  std::vector<double> g_ua, g_ub;
  const bool need_grad = z.requires_grad() || z_aug.requires_grad();
  const bool fused = precision == Precision::f32
                         ? fused_view_loss<float>(ua, ub, n, d, tau, need_grad, value, g_ua, g_ub)
                         : fused_view_loss<double>(ua, ub, n, d, tau, need_grad, value, g_ua, g_ub);
  if (!fused) {
    row_shifted_view_loss(ua, ub, n, d, tau, need_grad, value, g_ua, g_ub);
  }
  if (!need_grad) return Tensor::scalar(value);

  auto grad_z = std::make_shared<const std::vector<double>>(unnormalize_grad(ua, norm_a, g_ua, n, d));
  auto grad_za = std::make_shared<const std::vector<double>>(unnormalize_grad(ub, norm_b, g_ub, n, d));
  return Tensor::make_result(1, 1, {value}, {z, z_aug}, [z, z_aug, grad_z, grad_za](const detail::Node& self) {
    const double g = self.grad[0];
    if (z.requires_grad()) {
      auto dst = z.grad_accumulator();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g * (*grad_z)[k];
    }
    if (z_aug.requires_grad()) {
      auto dst = z_aug.grad_accumulator();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g * (*grad_za)[k];
    }
  });
}

ContrastTerms contrast_loss_terms(const EmbeddingSet& e, const ModelParams& p, const ContrastConfig& cfg) {
  cfg.validate();
  ContrastTerms out;
  std::vector<Tensor> parts;
  if (cfg.semantic) {
    Tensor l = view_loss(project(p, e.h_s), project(p, e.h_s_aug), cfg.tau, cfg.precision);
    out.semantic = l.item();
    parts.push_back(l);
  }
  if (cfg.contextual) {
    Tensor l = view_loss(project(p, e.h_c), project(p, e.h_c_aug), cfg.tau, cfg.precision);
    out.contextual = l.item();
    parts.push_back(scale(l, cfg.beta1));
  }
  if (cfg.fusion) {
    Tensor l = view_loss(project(p, e.h_f), project(p, e.h_f_aug), cfg.tau, cfg.precision);
    out.fusion = l.item();
    parts.push_back(scale(l, cfg.beta2));
  }
  Tensor total = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) total = add(total, parts[k]);
  out.total = total;
  return out;
}

Tensor contrast_loss(const EmbeddingSet& e, const ModelParams& p, const ContrastConfig& cfg) {
  return contrast_loss_terms(e, p, cfg).total;
}

Tensor controller_loss(const Tensor& lambda, const Tensor& h_s, const Tensor& h_c, const ControllerConfig& cfg) {
  cfg.validate();
  if (lambda.cols() != 1 || lambda.rows() != h_s.rows()) {
    throw ShapeError("controller_loss: lambda " + lambda.shape_string() + " vs embeddings " + h_s.shape_string());
  }
  const Tensor similarity = cosine_rows(h_s.detach(), h_c.detach());
  Tensor loss = sum(mul(lambda, similarity));
  if (cfg.alpha1 != 0.0) loss = add(loss, scale(sqrt(sum(mul(lambda, lambda))), cfg.alpha1));
  if (cfg.alpha2 != 0.0) loss = add(loss, scale(abs(add_scalar(mean(lambda), -cfg.epsilon)), cfg.alpha2));
  return loss;
}

}  // namespace muse
