#include "muse/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "muse/errors.hpp"

namespace muse {
namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  return Tensor::from(fan_in, fan_out, std::move(w), true);
}

Tensor zeros_param(std::size_t rows, std::size_t cols) { return Tensor::zeros(rows, cols, true); }

void check_width(const char* what, const Tensor& t, std::size_t cols) {
  if (t.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) + " columns, got " + t.shape_string());
  }
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& d, Rng& rng) {
  if (d.in_features == 0 || d.embed == 0 || d.project == 0 || d.filter == 0) {
    throw ContractError("model dimensions must be positive");
  }
  ModelParams p;
  p.dims = d;
  p.enc_w1 = glorot(d.in_features, d.embed, rng);
  p.enc_w2 = glorot(d.embed, d.embed, rng);
  p.proj_w1 = glorot(d.embed, d.project, rng);
  p.proj_b1 = zeros_param(1, d.project);
  p.proj_w2 = glorot(d.project, d.project, rng);
  p.proj_b2 = zeros_param(1, d.project);
  p.filter_s_w = glorot(d.embed, d.filter, rng);
  p.filter_s_b = zeros_param(1, d.filter);
  p.filter_c_w = glorot(d.embed, d.filter, rng);
  p.filter_c_b = zeros_param(1, d.filter);
  p.ctrl_w1 = glorot(2 * d.filter + 1, d.filter, rng);
  p.ctrl_b1 = zeros_param(1, d.filter);
  p.ctrl_w2 = glorot(d.filter, 1, rng);
  p.ctrl_b2 = zeros_param(1, 1);
  return p;
}

std::vector<Tensor> ModelParams::representation_params() const {
  return {enc_w1, enc_w2, proj_w1, proj_b1, proj_w2, proj_b2};
}

std::vector<Tensor> ModelParams::controller_params() const {
  return {filter_s_w, filter_s_b, filter_c_w, filter_c_b, ctrl_w1, ctrl_b1, ctrl_w2, ctrl_b2};
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  return {{"encoder.w1", enc_w1},        {"encoder.w2", enc_w2},        {"projector.w1", proj_w1},
          {"projector.b1", proj_b1},     {"projector.w2", proj_w2},     {"projector.b2", proj_b2},
          {"filter_s.w", filter_s_w},    {"filter_s.b", filter_s_b},    {"filter_c.w", filter_c_w},
          {"filter_c.b", filter_c_b},    {"controller.w1", ctrl_w1},    {"controller.b1", ctrl_b1},
          {"controller.w2", ctrl_w2},    {"controller.b2", ctrl_b2}};
}

ModelParams ModelParams::clone() const {
  ModelParams c = *this;
  for (Tensor* t : {&c.enc_w1, &c.enc_w2, &c.proj_w1, &c.proj_b1, &c.proj_w2, &c.proj_b2, &c.filter_s_w,
                    &c.filter_s_b, &c.filter_c_w, &c.filter_c_b, &c.ctrl_w1, &c.ctrl_b1, &c.ctrl_w2, &c.ctrl_b2}) {
    *t = t->clone();
  }
  return c;
}

Tensor apply_dropout(const Tensor& h, const Dropout& dropout) {
  if (!dropout.active()) return h;
  if (!(dropout.rate < 1.0)) throw ContractError("dropout rate must be below 1");
  const double keep_scale = 1.0 / (1.0 - dropout.rate);
  std::vector<double> mask(h.size());
  for (auto& m : mask) m = dropout.rng->bernoulli(dropout.rate) ? 0.0 : keep_scale;
  return mul(h, Tensor::from(h.rows(), h.cols(), std::move(mask)));
}

Tensor encode_semantic(const ModelParams& p, const Tensor& x, const Dropout& dropout) {
  if (x.cols() != p.enc_w1.rows()) {
    throw ShapeError("encode_semantic: features " + x.shape_string() + " vs encoder " + p.enc_w1.shape_string());
  }
  Tensor hidden = apply_dropout(relu(matmul(x, p.enc_w1)), dropout);
  return matmul(hidden, p.enc_w2);
}

Tensor encode_contextual(const ModelParams& p, const Tensor& x, const SparseMatrix& adj_hat, const Dropout& dropout) {
  if (x.cols() != p.enc_w1.rows()) {
    throw ShapeError("encode_contextual: features " + x.shape_string() + " vs encoder " + p.enc_w1.shape_string());
  }
  if (adj_hat.rows() != x.rows() || adj_hat.cols() != x.rows()) {
    throw ShapeError("encode_contextual: adjacency " + std::to_string(adj_hat.rows()) + "x" +
                     std::to_string(adj_hat.cols()) + " vs features " + x.shape_string());
  }
  Tensor hidden = apply_dropout(relu(spmm(adj_hat, matmul(x, p.enc_w1))), dropout);
  return spmm(adj_hat, matmul(hidden, p.enc_w2));
}

Tensor encode_contextual(const ModelParams& p, const Tensor& x, const Tensor& adj_hat, const Dropout& dropout) {
  if (x.cols() != p.enc_w1.rows()) {
    throw ShapeError("encode_contextual: features " + x.shape_string() + " vs encoder " + p.enc_w1.shape_string());
  }
  if (adj_hat.rows() != x.rows() || adj_hat.cols() != x.rows()) {
    throw ShapeError("encode_contextual: adjacency " + adj_hat.shape_string() + " vs features " + x.shape_string());
  }
  Tensor hidden = apply_dropout(relu(matmul(adj_hat, matmul(x, p.enc_w1))), dropout);
  return matmul(adj_hat, matmul(hidden, p.enc_w2));
}

Tensor project(const ModelParams& p, const Tensor& h) {
  check_width("project", h, p.proj_w1.rows());
  return add(matmul(relu(add(matmul(h, p.proj_w1), p.proj_b1)), p.proj_w2), p.proj_b2);
}

Tensor degree_feature(std::span<const std::size_t> degree) {
  const std::size_t n = degree.size();
  std::vector<double> v(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::log1p(static_cast<double>(degree[i]));
    total += v[i];
  }
  const double mu = n ? total / static_cast<double>(n) : 0.0;
  double var = 0.0;
  for (double x : v) var += (x - mu) * (x - mu);
  const double sd = n ? std::sqrt(var / static_cast<double>(n)) : 0.0;
  for (auto& x : v) x = sd < 1e-12 ? 0.0 : (x - mu) / sd;
  return Tensor::from(n, 1, std::move(v));
}

Tensor controller_lambda(const ModelParams& p, const Tensor& h_s, const Tensor& h_c, const Tensor& degree_feat) {
  check_width("controller_lambda(h_s)", h_s, p.filter_s_w.rows());
  check_width("controller_lambda(h_c)", h_c, p.filter_c_w.rows());
  if (h_c.rows() != h_s.rows() || degree_feat.rows() != h_s.rows() || degree_feat.cols() != 1) {
    throw ShapeError("controller_lambda: row mismatch between " + h_s.shape_string() + ", " + h_c.shape_string() +
                     " and degree " + degree_feat.shape_string());
  }
  Tensor w_s = relu(add(matmul(h_s.detach(), p.filter_s_w), p.filter_s_b));
  Tensor w_c = relu(add(matmul(h_c.detach(), p.filter_c_w), p.filter_c_b));
  Tensor input = concat_cols({w_s, w_c, degree_feat.detach()});
  Tensor hidden = relu(add(matmul(input, p.ctrl_w1), p.ctrl_b1));
  return sigmoid(add(matmul(hidden, p.ctrl_w2), p.ctrl_b2));
}

Tensor controller_lambda(const ModelParams& p, const Tensor& h_s, const Tensor& h_c,
                         std::span<const std::size_t> degree) {
  return controller_lambda(p, h_s, h_c, degree_feature(degree));
}

Tensor fuse(const Tensor& h_s, const Tensor& h_c, const Tensor& lambda) {
  if (h_s.rows() != h_c.rows() || h_s.cols() != h_c.cols()) {
    throw ShapeError("fuse: " + h_s.shape_string() + " vs " + h_c.shape_string());
  }
  return add(h_s, scale_rows(h_c, lambda));
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr const char* kMagic = "muse-checkpoint v1";

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  const auto& d = ckpt.params.dims;
  out << kMagic << '\n';
  out << "dims " << d.in_features << ' ' << d.embed << ' ' << d.project << ' ' << d.filter << '\n';
  out << "fixed_lambda " << (ckpt.fixed_lambda ? format_double(*ckpt.fixed_lambda) : std::string("none")) << '\n';
  for (const auto& [name, t] : ckpt.params.named()) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    const auto v = t.data();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        if (c) out << ' ';
        out << format_double(v[r * t.cols() + c]);
      }
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw CheckpointError(path.string() + ": not a checkpoint file");

  Checkpoint ckpt;
  std::string key;
  ModelDims d;
  if (!(in >> key >> d.in_features >> d.embed >> d.project >> d.filter) || key != "dims") {
    throw CheckpointError(path.string() + ": malformed dims line");
  }
  std::string lambda_token;
  if (!(in >> key >> lambda_token) || key != "fixed_lambda") {
    throw CheckpointError(path.string() + ": malformed fixed_lambda line");
  }
  if (lambda_token != "none") ckpt.fixed_lambda = std::stod(lambda_token);

  Rng unused(0);
  ckpt.params = ModelParams::init(d, unused);
  for (auto& [name, t] : ckpt.params.named()) {
    std::string file_name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> key >> file_name >> rows >> cols) || key != "tensor") {
      throw CheckpointError(path.string() + ": expected tensor header for " + name);
    }
    if (file_name != name || rows != t.rows() || cols != t.cols()) {
      throw CheckpointError(path.string() + ": tensor " + file_name + " [" + std::to_string(rows) + "x" +
                            std::to_string(cols) + "] does not match expected " + name + " " + t.shape_string());
    }
    auto dst = t.mutable_data();
    for (auto& v : dst) {
      std::string token;
      if (!(in >> token)) throw CheckpointError(path.string() + ": truncated tensor " + name);
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw CheckpointError(path.string() + ": bad value '" + token + "' in " + name);
      }
    }
  }
  if (!(in >> key) || key != "end") throw CheckpointError(path.string() + ": missing end marker");
  return ckpt;
}

}  // namespace muse
