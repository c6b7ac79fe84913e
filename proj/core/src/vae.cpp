#include "hcvae/vae.hpp"

#include <cmath>
#include <random>
#include <type_traits>

#include "hcvae/errors.hpp"

namespace hcvae {

void VaeConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || n_hidden_enc < 1 || n_hidden_dec < 1 || latent_dim < 1)
    throw ConfigError("VaeConfig: all dimensions and layer counts must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("VaeConfig: beta must be >= 0");
}

namespace {

template <typename T>
void append_layer(std::vector<std::span<T>>& out, DenseLayer<T>& l) {
  out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
  out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
}

template <typename T>
void append_layer(std::vector<std::span<const T>>& out, const DenseLayer<T>& l) {
  out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
  out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
}

template <typename T>
void append_shape(std::vector<TensorShape>& out, const std::string& prefix, const DenseLayer<T>& l) {
  out.push_back({prefix + ".weight", {l.out_dim(), l.in_dim()}});
  out.push_back({prefix + ".bias", {l.out_dim()}});
}

template <typename T>
DenseLayer<T> zero_layer(std::size_t in, std::size_t out, Activation act) {
  return DenseLayer<T>{Matrix<T>::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                       Vector<T>::Zero(static_cast<Eigen::Index>(out)), act};
}

// Activations kept for the backward pass.
template <typename T>
struct ForwardTrace {
  std::vector<Matrix<T>> enc_out;  // output of each encoder layer
  Posterior<T> post;
  Matrix<T> z;
  Matrix<T> dec_in;
  std::vector<Matrix<T>> dec_out;  // output of each decoder layer
  Matrix<T> x_hat;
};

template <typename T>
void check_params(const ModelParams<T>& p) {
  require_dims(!p.encoder.empty() && !p.decoder.empty(), "model has no hidden layers");
  require_dims(p.encoder.front().in_dim() == p.config.input_dim + p.config.cond_dim,
               "encoder input width != input_dim + cond_dim");
  require_dims(p.decoder.front().in_dim() == p.config.latent_dim + p.config.cond_dim,
               "decoder input width != latent_dim + cond_dim");
  require_dims(p.output.out_dim() == p.config.input_dim, "output width != input_dim");
}

template <typename T>
void check_inputs(const ModelParams<T>& p, const Matrix<T>& x, const std::type_identity_t<Matrix<T>>* c) {
  check_params(p);
  require_dims(static_cast<std::size_t>(x.cols()) == p.config.input_dim,
               "input has " + std::to_string(x.cols()) + " columns, model expects " +
                   std::to_string(p.config.input_dim));
  if (c) {
    require_dims(c->rows() == x.rows(), "condition batch size differs from input batch size");
    require_dims(static_cast<std::size_t>(c->cols()) == p.config.cond_dim,
                 "condition has " + std::to_string(c->cols()) + " columns, model expects " +
                     std::to_string(p.config.cond_dim));
  } else {
    require_dims(p.config.cond_dim == 0, "unconditional path called on a model with cond_dim > 0");
  }
}

template <typename T>
Posterior<T> run_encoder(const ModelParams<T>& p, const Matrix<T>& enc_in, std::type_identity_t<std::vector<Matrix<T>>>* outs) {
  Matrix<T> h = enc_in;
  for (const auto& layer : p.encoder) {
    h = dense_forward(layer, h);
    if (outs) outs->push_back(h);
  }
  return Posterior<T>{dense_forward(p.mu_head, h), dense_forward(p.logvar_head, h)};
}

template <typename T>
Matrix<T> run_decoder(const ModelParams<T>& p, const Matrix<T>& dec_in, std::type_identity_t<std::vector<Matrix<T>>>* outs) {
  Matrix<T> h = dec_in;
  for (const auto& layer : p.decoder) {
    h = dense_forward(layer, h);
    if (outs) outs->push_back(h);
  }
  return dense_forward(p.output, h);
}

template <typename T>
Vector<T> kl_rows(const Matrix<T>& mu, const Matrix<T>& logvar) {
  Vector<T> kl(mu.rows());
  for (Eigen::Index b = 0; b < mu.rows(); ++b)
    kl(b) = kl_gaussian<T>(std::span<const T>(mu.row(b).data(), static_cast<std::size_t>(mu.cols())),
                           std::span<const T>(logvar.row(b).data(), static_cast<std::size_t>(logvar.cols())));
  return kl;
}

template <typename T>
LossTerms reduce_loss(const Matrix<T>& x, const Matrix<T>& x_hat, const Posterior<T>& post, double beta) {
  const Vector<T> recon = (x - x_hat).rowwise().squaredNorm();
  const Vector<T> kl = kl_rows(post.mu, post.logvar);
  const T b = static_cast<T>(beta);
  const T n = static_cast<T>(x.rows());
  LossTerms terms;
  terms.recon = static_cast<double>(recon.sum() / n);
  terms.kl = static_cast<double>(kl.sum() / n);
  terms.loss = static_cast<double>((recon + b * kl).sum() / n);
  return terms;
}

template <typename T>
ForwardTrace<T> forward(const ModelParams<T>& p, const Matrix<T>& enc_in, const Matrix<T>* c, const Matrix<T>& eps) {
  require_dims(eps.rows() == enc_in.rows() && static_cast<std::size_t>(eps.cols()) == p.config.latent_dim,
               "eps must be batch x latent_dim");
  ForwardTrace<T> tr;
  tr.post = run_encoder(p, enc_in, &tr.enc_out);
  tr.z = reparameterize(tr.post.mu, tr.post.logvar, eps);
  tr.dec_in = c ? hconcat(tr.z, *c) : tr.z;
  tr.x_hat = run_decoder(p, tr.dec_in, &tr.dec_out);
  return tr;
}

template <typename T>
LossTerms loss_and_grad(const ModelParams<T>& p, const Matrix<T>& x, const Matrix<T>* c, const Matrix<T>& eps,
                        double beta, ModelGrads<T>& g) {
  const Matrix<T> enc_in = c ? hconcat(x, *c) : x;
  const ForwardTrace<T> tr = forward(p, enc_in, c, eps);
  const LossTerms terms = reduce_loss(x, tr.x_hat, tr.post, beta);

  const T inv_n = T(1) / static_cast<T>(x.rows());
  const T b = static_cast<T>(beta);
  const std::size_t latent = p.config.latent_dim;

  g.config = p.config;
  g.encoder.resize(p.encoder.size());
  g.decoder.resize(p.decoder.size());
  auto store = [](DenseLayer<T>& dst, const DenseLayer<T>& like, DenseGrad<T>& src) {
    dst.weights = std::move(src.weights);
    dst.bias = std::move(src.bias);
    dst.activation = like.activation;
  };

  // Decoder.
  Matrix<T> grad = (tr.x_hat - x) * (T(2) * inv_n);
  {
    const Matrix<T>& last_hidden = tr.dec_out.back();
    DenseGrad<T> dg = dense_backward(p.output, last_hidden, tr.x_hat, grad);
    store(g.output, p.output, dg);
    grad = std::move(dg.input);
  }
  for (std::size_t i = p.decoder.size(); i-- > 0;) {
    const Matrix<T>& in = i == 0 ? tr.dec_in : tr.dec_out[i - 1];
    DenseGrad<T> dg = dense_backward(p.decoder[i], in, tr.dec_out[i], grad);
    store(g.decoder[i], p.decoder[i], dg);
    grad = std::move(dg.input);
  }

  // Latent: z = mu + exp(0.5 logvar) * eps, plus beta * KL / n.
  const Matrix<T> dz = grad.leftCols(static_cast<Eigen::Index>(latent));
  const auto sigma = (tr.post.logvar.array() * T(0.5)).exp();
  const Matrix<T> dmu = (dz.array() + b * inv_n * tr.post.mu.array()).matrix();
  const Matrix<T> dlogvar =
      (dz.array() * eps.array() * sigma * T(0.5) + b * inv_n * T(0.5) * (tr.post.logvar.array().exp() - T(1)))
          .matrix();

  const Matrix<T>& top = tr.enc_out.back();
  DenseGrad<T> gmu = dense_backward(p.mu_head, top, tr.post.mu, dmu);
  DenseGrad<T> glv = dense_backward(p.logvar_head, top, tr.post.logvar, dlogvar);
  grad = gmu.input + glv.input;
  store(g.mu_head, p.mu_head, gmu);
  store(g.logvar_head, p.logvar_head, glv);

  for (std::size_t i = p.encoder.size(); i-- > 0;) {
    const Matrix<T>& in = i == 0 ? enc_in : tr.enc_out[i - 1];
    DenseGrad<T> dg = dense_backward(p.encoder[i], in, tr.enc_out[i], grad);
    store(g.encoder[i], p.encoder[i], dg);
    grad = std::move(dg.input);
  }
  return terms;
}

}  // namespace

template <typename T>
ModelParams<T> ModelParams<T>::init(const VaeConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelParams<T> p;
  p.config = config;
  std::size_t in = config.input_dim + config.cond_dim;
  for (std::size_t i = 0; i < config.n_hidden_enc; ++i) {
    p.encoder.push_back(make_dense_layer<T>(in, config.hidden_dim, Activation::kRelu, rng));
    in = config.hidden_dim;
  }
  p.mu_head = make_dense_layer<T>(config.hidden_dim, config.latent_dim, Activation::kLinear, rng);
  p.logvar_head = make_dense_layer<T>(config.hidden_dim, config.latent_dim, Activation::kLinear, rng);
  in = config.latent_dim + config.cond_dim;
  for (std::size_t i = 0; i < config.n_hidden_dec; ++i) {
    p.decoder.push_back(make_dense_layer<T>(in, config.hidden_dim, Activation::kRelu, rng));
    in = config.hidden_dim;
  }
  p.output = make_dense_layer<T>(config.hidden_dim, config.input_dim, Activation::kLinear, rng);
  return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const VaeConfig& config) {
  config.validate();
  ModelParams<T> p;
  p.config = config;
  std::size_t in = config.input_dim + config.cond_dim;
  for (std::size_t i = 0; i < config.n_hidden_enc; ++i) {
    p.encoder.push_back(zero_layer<T>(in, config.hidden_dim, Activation::kRelu));
    in = config.hidden_dim;
  }
  p.mu_head = zero_layer<T>(config.hidden_dim, config.latent_dim, Activation::kLinear);
  p.logvar_head = zero_layer<T>(config.hidden_dim, config.latent_dim, Activation::kLinear);
  in = config.latent_dim + config.cond_dim;
  for (std::size_t i = 0; i < config.n_hidden_dec; ++i) {
    p.decoder.push_back(zero_layer<T>(in, config.hidden_dim, Activation::kRelu));
    in = config.hidden_dim;
  }
  p.output = zero_layer<T>(config.hidden_dim, config.input_dim, Activation::kLinear);
  return p;
}

template <typename T>
std::vector<std::span<T>> ModelParams<T>::tensors() {
  std::vector<std::span<T>> out;
  for (auto& l : encoder) append_layer(out, l);
  append_layer(out, mu_head);
  append_layer(out, logvar_head);
  for (auto& l : decoder) append_layer(out, l);
  append_layer(out, output);
  return out;
}

template <typename T>
std::vector<std::span<const T>> ModelParams<T>::tensors() const {
  std::vector<std::span<const T>> out;
  for (const auto& l : encoder) append_layer(out, l);
  append_layer(out, mu_head);
  append_layer(out, logvar_head);
  for (const auto& l : decoder) append_layer(out, l);
  append_layer(out, output);
  return out;
}

template <typename T>
std::vector<TensorShape> ModelParams<T>::tensor_shapes() const {
  std::vector<TensorShape> out;
  for (std::size_t i = 0; i < encoder.size(); ++i) append_shape(out, "encoder." + std::to_string(i), encoder[i]);
  append_shape(out, "mu_head", mu_head);
  append_shape(out, "logvar_head", logvar_head);
  for (std::size_t i = 0; i < decoder.size(); ++i) append_shape(out, "decoder." + std::to_string(i), decoder[i]);
  append_shape(out, "output", output);
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

template <typename T>
std::vector<T> ModelParams<T>::flatten() const {
  std::vector<T> flat;
  flat.reserve(parameter_count());
  for (const auto& t : tensors()) flat.insert(flat.end(), t.begin(), t.end());
  return flat;
}

template <typename T>
void ModelParams<T>::assign_flat(std::span<const T> values) {
  require_dims(values.size() == parameter_count(), "assign_flat: wrong number of values");
  std::size_t at = 0;
  for (auto& t : tensors()) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(at),
              values.begin() + static_cast<std::ptrdiff_t>(at + t.size()), t.begin());
    at += t.size();
  }
}

template <typename T>
Posterior<T> encode(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c) {
  check_inputs(params, x, &c);
  return run_encoder(params, hconcat(x, c), nullptr);
}

template <typename T>
Posterior<T> encode(const ModelParams<T>& params, const Matrix<T>& x) {
  check_inputs(params, x, nullptr);
  return run_encoder(params, x, nullptr);
}

template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& logvar, const Matrix<T>& eps) {
  require_dims(mu.rows() == logvar.rows() && mu.cols() == logvar.cols() && mu.rows() == eps.rows() &&
                   mu.cols() == eps.cols(),
               "reparameterize: mu, logvar and eps must share a shape");
  return (mu.array() + (logvar.array() * T(0.5)).exp() * eps.array()).matrix();
}

template <typename T>
Matrix<T> decode(const ModelParams<T>& params, const Matrix<T>& z, const Matrix<T>& c) {
  check_params(params);
  require_dims(static_cast<std::size_t>(z.cols()) == params.config.latent_dim, "z width != latent_dim");
  require_dims(static_cast<std::size_t>(c.cols()) == params.config.cond_dim && c.rows() == z.rows(),
               "condition shape mismatch in decode");
  return run_decoder(params, hconcat(z, c), nullptr);
}

template <typename T>
Matrix<T> decode(const ModelParams<T>& params, const Matrix<T>& z) {
  check_params(params);
  require_dims(static_cast<std::size_t>(z.cols()) == params.config.latent_dim, "z width != latent_dim");
  require_dims(params.config.cond_dim == 0, "unconditional decode on a model with cond_dim > 0");
  return run_decoder(params, z, nullptr);
}

template <typename T>
T kl_gaussian(std::span<const T> mu, std::span<const T> logvar) {
  require_dims(mu.size() == logvar.size(), "kl_gaussian: mu and logvar lengths differ");
  T sum = 0;
  for (std::size_t d = 0; d < mu.size(); ++d) sum += mu[d] * mu[d] + std::exp(logvar[d]) - T(1) - logvar[d];
  return T(0.5) * sum;
}

template <typename T>
LossTerms elbo_loss(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c, const Matrix<T>& eps,
                    double beta) {
  check_inputs(params, x, &c);
  const ForwardTrace<T> tr = forward(params, hconcat(x, c), &c, eps);
  return reduce_loss(x, tr.x_hat, tr.post, beta);
}

template <typename T>
LossTerms elbo_loss(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& eps, double beta) {
  check_inputs(params, x, nullptr);
  const ForwardTrace<T> tr = forward(params, x, static_cast<const Matrix<T>*>(nullptr), eps);
  return reduce_loss(x, tr.x_hat, tr.post, beta);
}

template <typename T>
LossTerms elbo_loss_and_grad(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c,
                             const Matrix<T>& eps, double beta, ModelGrads<T>& grads) {
  check_inputs(params, x, &c);
  return loss_and_grad(params, x, &c, eps, beta, grads);
}

template <typename T>
LossTerms elbo_loss_and_grad(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& eps, double beta,
                             ModelGrads<T>& grads) {
  check_inputs(params, x, nullptr);
  return loss_and_grad(params, x, static_cast<const Matrix<T>*>(nullptr), eps, beta, grads);
}

template <typename T>
Vector<T> reconstruction_errors(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c) {
  check_inputs(params, x, &c);
  const Posterior<T> post = run_encoder(params, hconcat(x, c), nullptr);
  const Matrix<T> x_hat = run_decoder(params, hconcat(post.mu, c), nullptr);
  return (x - x_hat).rowwise().squaredNorm();
}

template <typename T>
T reconstruction_error(const ModelParams<T>& params, std::span<const T> x, std::span<const T> c) {
  const Matrix<T> xm = Eigen::Map<const Matrix<T>>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  const Matrix<T> cm = Eigen::Map<const Matrix<T>>(c.data(), 1, static_cast<Eigen::Index>(c.size()));
  return reconstruction_errors(params, xm, cm)(0);
}

#define HCVAE_INSTANTIATE(T)                                                                                      \
  template struct ModelParams<T>;                                                                                 \
  template Posterior<T> encode(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&);                        \
  template Posterior<T> encode(const ModelParams<T>&, const Matrix<T>&);                                          \
  template Matrix<T> reparameterize(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&);                        \
  template Matrix<T> decode(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&);                           \
  template Matrix<T> decode(const ModelParams<T>&, const Matrix<T>&);                                             \
  template T kl_gaussian(std::span<const T>, std::span<const T>);                                                 \
  template LossTerms elbo_loss(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,       \
                               double);                                                                           \
  template LossTerms elbo_loss(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&, double);                \
  template LossTerms elbo_loss_and_grad(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&,                \
                                        const Matrix<T>&, double, ModelGrads<T>&);                                \
  template LossTerms elbo_loss_and_grad(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&, double,        \
                                        ModelGrads<T>&);                                                          \
  template Vector<T> reconstruction_errors(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&);            \
  template T reconstruction_error(const ModelParams<T>&, std::span<const T>, std::span<const T>);

HCVAE_INSTANTIATE(float)
HCVAE_INSTANTIATE(double)
// Extended precision for finite-difference oracles.
HCVAE_INSTANTIATE(long double)

#undef HCVAE_INSTANTIATE

}  // namespace hcvae
