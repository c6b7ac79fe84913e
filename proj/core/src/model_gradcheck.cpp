#include "hcvae/model_gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace hcvae {
namespace {

// Standard-normal inputs, one-hot conditions split into two blocks like a
// two-level taxonomy, frozen eps.
struct Batch {
  Matrix<double> x;
  Matrix<double> c;
  Matrix<double> eps;
};

Batch make_batch(const VaeConfig& arch, std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  const auto rows = static_cast<Eigen::Index>(n);
  Batch b;
  b.x.resize(rows, static_cast<Eigen::Index>(arch.input_dim));
  for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x.data()[i] = d(rng);
  b.eps.resize(rows, static_cast<Eigen::Index>(arch.latent_dim));
  for (Eigen::Index i = 0; i < b.eps.size(); ++i) b.eps.data()[i] = d(rng);
  b.c = Matrix<double>::Zero(rows, static_cast<Eigen::Index>(arch.cond_dim));
  if (arch.cond_dim > 0) {
    const std::size_t first = std::max<std::size_t>(1, arch.cond_dim / 2);
    for (Eigen::Index r = 0; r < rows; ++r) {
      b.c(r, static_cast<Eigen::Index>(rng() % first)) = 1.0;
      if (arch.cond_dim > first) b.c(r, static_cast<Eigen::Index>(first + rng() % (arch.cond_dim - first))) = 1.0;
    }
  }
  return b;
}

// Sign pattern of every ReLU pre-activation for the batch.
std::vector<bool> relu_pattern(const ModelParams<double>& p, const Batch& b) {
  std::vector<bool> out;
  auto record = [&](const Matrix<double>& pre) {
    for (Eigen::Index i = 0; i < pre.size(); ++i) out.push_back(pre.data()[i] > 0.0);
  };
  Matrix<double> h = hconcat(b.x, b.c);
  for (const auto& l : p.encoder) {
    Matrix<double> pre = dense_preactivation(l, h);
    record(pre);
    h = pre.cwiseMax(0.0);
  }
  const Matrix<double> mu = dense_preactivation(p.mu_head, h);
  const Matrix<double> lv = dense_preactivation(p.logvar_head, h);
  h = hconcat(reparameterize(mu, lv, b.eps), b.c);
  for (const auto& l : p.decoder) {
    Matrix<double> pre = dense_preactivation(l, h);
    record(pre);
    h = pre.cwiseMax(0.0);
  }
  return out;
}

// ELBO evaluated end to end in long double from the public forward ops; the
// reduction stays in long double so f(p+h) - f(p-h) keeps its precision.
long double elbo_extended(const ModelParams<long double>& p, const Matrix<long double>& x,
                          const Matrix<long double>& c, const Matrix<long double>& eps, long double beta) {
  const auto post = encode(p, x, c);
  const Matrix<long double> x_hat = decode(p, reparameterize(post.mu, post.logvar, eps), c);
  long double total = 0.0L;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    long double recon = 0.0L;
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
      const long double e = x(r, d) - x_hat(r, d);
      recon += e * e;
    }
    long double kl = 0.0L;
    for (Eigen::Index d = 0; d < post.mu.cols(); ++d)
      kl += post.mu(r, d) * post.mu(r, d) + std::exp(post.logvar(r, d)) - 1.0L - post.logvar(r, d);
    total += recon + beta * 0.5L * kl;
  }
  return total / static_cast<long double>(x.rows());
}

std::string tensor_of(const std::vector<TensorShape>& shapes, std::size_t flat_index) {
  for (const auto& s : shapes) {
    std::size_t n = 1;
    for (auto d : s.dims) n *= d;
    if (flat_index < n) return s.name;
    flat_index -= n;
  }
  return "?";
}

}  // namespace

ElboGradCheckReport check_elbo_gradients(const ElboGradCheckConfig& cfg) {
  cfg.architecture.validate();
  if (cfg.batch == 0) throw ConfigError("gradient check batch must be >= 1");
  std::mt19937_64 rng(cfg.seed);

  // Float weights are the reference point so both precisions see the same
  // model. Nonzero biases exercise the bias paths.
  auto pf = ModelParams<float>::init(cfg.architecture, cfg.seed);
  {
    std::normal_distribution<float> d(0.0f, 0.05f);
    auto ts = pf.tensors();
    const auto shapes = pf.tensor_shapes();
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (shapes[i].dims.size() == 1)
        for (auto& v : ts[i]) v = d(rng);
  }
  const ModelParams<double> pd = pf.cast<double>();
  const Batch b = make_batch(cfg.architecture, cfg.batch, rng);
  const double beta = cfg.architecture.beta;

  auto g64 = ModelParams<double>::zeros(cfg.architecture);
  elbo_loss_and_grad(pd, b.x, b.c, b.eps, beta, g64);
  auto g32 = ModelParams<float>::zeros(cfg.architecture);
  const Matrix<float> xf = b.x.cast<float>(), cf = b.c.cast<float>(), ef = b.eps.cast<float>();
  elbo_loss_and_grad(pf, xf, cf, ef, beta, g32);

  // Per-tensor sampling so small tensors (heads, biases) are always covered.
  const auto shapes = pd.tensor_shapes();
  std::vector<std::size_t> coords;
  std::size_t offset = 0;
  for (const auto& s : shapes) {
    std::size_t n = 1;
    for (auto d : s.dims) n *= d;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), offset);
    if (cfg.coordinates_per_tensor != 0 && cfg.coordinates_per_tensor < n) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(cfg.coordinates_per_tensor);
    }
    coords.insert(coords.end(), idx.begin(), idx.end());
    offset += n;
  }
  std::sort(coords.begin(), coords.end());

  const std::vector<double> flat = pd.flatten();
  auto probe = pd;
  // Drop coordinates whose stencil crosses a ReLU kink.
  const std::vector<bool> base = relu_pattern(pd, b);
  std::vector<std::size_t> smooth;
  std::vector<double> shifted = flat;
  for (std::size_t idx : coords) {
    bool same = true;
    const std::vector<double> offsets =
        cfg.order == 2 ? std::vector<double>{1.0, -1.0} : std::vector<double>{1.0, -1.0, 2.0, -2.0};
    for (double k : offsets) {
      shifted[idx] = flat[idx] + k * cfg.step;
      probe.assign_flat(shifted);
      same = same && relu_pattern(probe, b) == base;
    }
    shifted[idx] = flat[idx];
    if (same) smooth.push_back(idx);
  }
  const std::size_t skipped = coords.size() - smooth.size();
  coords = std::move(smooth);
  // Oracle: finite differences of the long double ELBO. Offsets are formed
  // in long double too, so the stencil points are exact.
  auto pl = pf.cast<long double>();
  const Matrix<long double> xl = b.x.cast<long double>(), cl = b.c.cast<long double>(),
                            el = b.eps.cast<long double>();
  std::vector<std::span<long double>> lt = pl.tensors();
  std::vector<long double*> slot;
  for (auto t : lt)
    for (auto& v : t) slot.push_back(&v);
  std::vector<double> numeric;
  numeric.reserve(coords.size());
  const long double h = static_cast<long double>(cfg.step);
  for (std::size_t idx : coords) {
    long double& w = *slot[idx];
    const long double saved = w;
    auto at = [&](long double k) {
      w = saved + k * h;
      const long double v = elbo_extended(pl, xl, cl, el, static_cast<long double>(beta));
      if (!std::isfinite(static_cast<double>(v))) throw NumericError("gradient check: loss is not finite");
      return v;
    };
    long double d;
    if (cfg.order == 2) {
      d = (at(1) - at(-1)) / (2.0L * h);
    } else {
      d = (8.0L * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0L * h);
    }
    w = saved;
    numeric.push_back(static_cast<double>(d));
  }

  const std::vector<double> a64 = g64.flatten();
  std::vector<double> a32;
  for (float v : g32.flatten()) a32.push_back(v);

  ElboGradCheckReport r;
  r.f64 = compare_gradients(a64, coords, numeric);
  r.f32 = compare_gradients(a32, coords, numeric);
  r.worst_tensor_f64 = tensor_of(shapes, r.f64.worst_index);
  r.worst_tensor_f32 = tensor_of(shapes, r.f32.worst_index);
  r.parameter_count = flat.size();
  r.kink_skipped = skipped;
  return r;
}

}  // namespace hcvae
