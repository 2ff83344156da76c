#include "dualdiff/denoiser.hpp"

#include <cmath>

#include "dualdiff/kernels.hpp"
#include "dualdiff/rng.hpp"
#include "dualdiff/tensor_io.hpp"

namespace dualdiff {

namespace {

// float goes through the dispatched kernels, double through the scalar
// reference path.
template <class T>
struct Kern {
  static T dot(std::size_t n, const T* a, const T* b) { return kernels::ref::dot(n, a, b); }
  static void axpy(std::size_t n, T a, const T* x, T* y) { kernels::ref::axpy(n, a, x, y); }
  static void silu(std::size_t n, const T* z, T* o) { kernels::ref::silu(n, z, o); }
  static void silu_backward(std::size_t n, const T* z, const T* g, T* o) {
    kernels::ref::silu_backward(n, z, g, o);
  }
};

template <>
struct Kern<float> {
  static float dot(std::size_t n, const float* a, const float* b) { return kernels::dot(n, a, b); }
  static void axpy(std::size_t n, float a, const float* x, float* y) { kernels::axpy(n, a, x, y); }
  static void silu(std::size_t n, const float* z, float* o) { kernels::silu(n, z, o); }
  static void silu_backward(std::size_t n, const float* z, const float* g, float* o) {
    kernels::silu_backward(n, z, g, o);
  }
};

template <class T>
void build_shape(MlpParamsT<T>& p, int D, int H, int E) {
  require(D >= 1 && H >= 1 && E >= 1, "mlp: dims must be >= 1");
  require(E % 2 == 0, "mlp: time-embedding width must be even");
  p.data_dim = D;
  p.hidden = H;
  p.embed = E;
  const int dims_in[4] = {D + E, H, H, H};
  const int dims_out[4] = {H, H, H, 2 * D + 1};
  std::size_t off = 0;
  for (int l = 0; l < 4; ++l) {
    p.layer[l].in = dims_in[l];
    p.layer[l].out = dims_out[l];
    p.layer[l].w = off;
    off += static_cast<std::size_t>(dims_in[l]) * dims_out[l];
    p.layer[l].b = off;
    off += static_cast<std::size_t>(dims_out[l]);
  }
  p.theta.assign(off, T(0));
}

template <class T>
void sinusoidal(int t, int E, T* out) {
  for (int i = 0; i < E / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / E);
    out[2 * i] = static_cast<T>(std::sin(t * freq));
    out[2 * i + 1] = static_cast<T>(std::cos(t * freq));
  }
}

template <class T>
void affine(const MlpParamsT<T>& p, int l, const std::vector<T>& in, std::vector<T>& out) {
  const auto& L = p.layer[l];
  out.resize(L.out);
  const T* W = p.w(l);
  const T* b = p.b(l);
  for (int o = 0; o < L.out; ++o)
    out[o] = Kern<T>::dot(in.size(), in.data(), W + static_cast<std::size_t>(o) * L.in) + b[o];
}

// Accumulates weight/bias gradients of one layer and optionally the gradient
// with respect to its input.
template <class T>
void accum_layer(const MlpParamsT<T>& p, int l, const std::vector<T>& in,
                 const std::vector<T>& g_out, std::span<T> grad, std::vector<T>* g_in) {
  const auto& L = p.layer[l];
  T* gW = grad.data() + L.w;
  T* gb = grad.data() + L.b;
  const T* W = p.w(l);
  for (int o = 0; o < L.out; ++o) {
    Kern<T>::axpy(in.size(), g_out[o], in.data(), gW + static_cast<std::size_t>(o) * L.in);
    gb[o] += g_out[o];
  }
  if (g_in) {
    g_in->assign(L.in, T(0));
    for (int o = 0; o < L.out; ++o)
      Kern<T>::axpy(L.in, g_out[o], W + static_cast<std::size_t>(o) * L.in, g_in->data());
  }
}

}  // namespace

std::size_t param_count(int D, int H, int E) {
  MlpParamsT<float> p;
  build_shape(p, D, H, E);
  return p.theta.size();
}

MlpParams init_params(int D, int H, int E, std::uint64_t seed) {
  MlpParams p;
  build_shape(p, D, H, E);
  Rng rng(seed);
  for (int l = 0; l < 4; ++l) {
    // Fan-in-scaled uniform; the output layer starts 10x smaller so the raw
    // heads begin near zero and r begins near 0.5.
    const double scale = (l == 3 ? 0.1 : 1.0) / std::sqrt(static_cast<double>(p.layer[l].in));
    float* W = p.w(l);
    const std::size_t nw = static_cast<std::size_t>(p.layer[l].out) * p.layer[l].in;
    for (std::size_t i = 0; i < nw; ++i)
      W[i] = static_cast<float>((2.0 * rng.uniform() - 1.0) * scale);
    // biases stay zero
  }
  p.version = 1;
  return p;
}

std::vector<float> time_embedding(int t, int T, int E) {
  require(E >= 2 && E % 2 == 0, "time_embedding: E must be even and >= 2");
  require(t >= 0 && t <= T, "time_embedding: t outside [0, T]");
  std::vector<float> out(E);
  sinusoidal(t, E, out.data());
  return out;
}

template <class T>
ModelOutputT<T> mlp_forward(const MlpParamsT<T>& p, std::span<const T> x, int t,
                            ForwardCacheT<T>* cache) {
  if (static_cast<int>(x.size()) != p.data_dim)
    throw std::invalid_argument("mlp_forward: input size != data_dim");
  for (T v : x)
    if (!std::isfinite(static_cast<double>(v)))
      throw std::invalid_argument("mlp_forward: non-finite input");
  ForwardCacheT<T> local;
  ForwardCacheT<T>* c = cache ? cache : &local;
  c->version = p.version;
  c->owner = &p;
  c->t = t;

  c->input.resize(p.data_dim + p.embed);
  std::copy(x.begin(), x.end(), c->input.begin());
  sinusoidal(t, p.embed, c->input.data() + p.data_dim);

  const std::vector<T>* prev = &c->input;
  for (int l = 0; l < 3; ++l) {
    affine(p, l, *prev, c->z[l]);
    c->a[l].resize(c->z[l].size());
    Kern<T>::silu(c->z[l].size(), c->z[l].data(), c->a[l].data());
    prev = &c->a[l];
  }
  affine(p, 3, *prev, c->out_raw);

  const int D = p.data_dim;
  ModelOutputT<T> out;
  out.eps_hat.assign(c->out_raw.begin(), c->out_raw.begin() + D);
  out.x_hat.assign(c->out_raw.begin() + D, c->out_raw.begin() + 2 * D);
  c->r = kernels::ref::sigmoid(c->out_raw[2 * D]);
  out.r = {c->r};
  return out;
}

template <class T>
void mlp_backward(const MlpParamsT<T>& p, const ForwardCacheT<T>& cache,
                  const OutputGradsT& grads, std::span<T> grad) {
  if (cache.owner != &p || cache.version != p.version)
    throw std::runtime_error("mlp_backward: stale forward cache");
  if (grad.size() != p.theta.size())
    throw std::invalid_argument("mlp_backward: gradient buffer size mismatch");
  const int D = p.data_dim;
  if (static_cast<int>(grads.d_eps.size()) != D || static_cast<int>(grads.d_x.size()) != D)
    throw std::invalid_argument("mlp_backward: output gradient size mismatch");

  std::vector<T> g(p.out_width());
  for (int d = 0; d < D; ++d) {
    g[d] = static_cast<T>(grads.d_eps[d]);
    g[D + d] = static_cast<T>(grads.d_x[d]);
  }
  // logistic squashing of the r head
  g[2 * D] = static_cast<T>(grads.d_r) * cache.r * (T(1) - cache.r);

  std::vector<T> g_prev, g_z;
  accum_layer(p, 3, cache.a[2], g, grad, &g_prev);
  for (int l = 2; l >= 0; --l) {
    g_z.resize(g_prev.size());
    Kern<T>::silu_backward(g_prev.size(), cache.z[l].data(), g_prev.data(), g_z.data());
    const std::vector<T>& in = (l == 0) ? cache.input : cache.a[l - 1];
    accum_layer(p, l, in, g_z, grad, l > 0 ? &g_prev : nullptr);
  }
}

template ModelOutputT<float> mlp_forward<float>(const MlpParamsT<float>&, std::span<const float>,
                                                int, ForwardCacheT<float>*);
template ModelOutputT<double> mlp_forward<double>(const MlpParamsT<double>&,
                                                  std::span<const double>, int,
                                                  ForwardCacheT<double>*);
template void mlp_backward<float>(const MlpParamsT<float>&, const ForwardCacheT<float>&,
                                  const OutputGradsT&, std::span<float>);
template void mlp_backward<double>(const MlpParamsT<double>&, const ForwardCacheT<double>&,
                                   const OutputGradsT&, std::span<double>);

ModelOutput forward(const MlpParams& p, std::span<const float> x, int t, ForwardCache* cache) {
  ModelOutputT<float> o = mlp_forward<float>(p, x, t, cache);
  return ModelOutput{std::move(o.eps_hat), std::move(o.x_hat), std::move(o.r)};
}

MlpParamsT<double> to_double(const MlpParams& p) {
  MlpParamsT<double> d;
  build_shape(d, p.data_dim, p.hidden, p.embed);
  for (std::size_t i = 0; i < p.theta.size(); ++i) d.theta[i] = p.theta[i];
  d.version = p.version;
  return d;
}

DenoiserFn make_denoiser_fn(const MlpParams& p) {
  // The wrapped params must outlive the returned function.
  return [pp = &p](std::span<const float> x, int t) { return forward(*pp, x, t); };
}

DenoiserFn oracle_denoiser(std::vector<float> c, NoiseSchedule s, StabilityGuard guard) {
  return [c = std::move(c), s = std::move(s), guard](std::span<const float> x_t,
                                                     int t) -> ModelOutput {
    if (x_t.size() != c.size())
      throw std::invalid_argument("oracle_denoiser: input size != point dimension");
    const double abar = s.alpha_bar(t);
    const double inv = 1.0 / std::sqrt(guard.den(1.0 - abar, "1 - alpha_bar"));
    ModelOutput out;
    out.x_hat = c;
    out.eps_hat.resize(c.size());
    kernels::axpby(c.size(), static_cast<float>(inv), x_t.data(),
                   static_cast<float>(-std::sqrt(abar) * inv), c.data(), out.eps_hat.data());
    out.r = {0.5f};
    return out;
  };
}

void save_checkpoint(const std::string& path, const MlpParams& p, const CheckpointMeta& meta) {
  nlohmann::json header;
  header["format"] = "dualdiff-checkpoint-v1";
  header["dtype"] = "f32le";
  header["arch"] = {{"data_dim", p.data_dim}, {"hidden", p.hidden}, {"embed", p.embed}};
  header["layer_order"] = "w0,b0,w1,b1,w2,b2,w3,b3 (weights row-major out x in)";
  header["param_count"] = p.theta.size();
  header["kind"] = meta.kind;
  header["seed"] = meta.seed;
  header["step"] = meta.step;
  header["schedule"] = meta.schedule;
  header["config_hash"] = meta.config_hash;
  write_header_payload(path, header, p.theta);
}

std::pair<MlpParams, CheckpointMeta> load_checkpoint(const std::string& path) {
  auto [header, payload] = read_header_payload(path);
  MlpParams p;
  CheckpointMeta meta;
  try {
    if (header.at("format").get<std::string>() != "dualdiff-checkpoint-v1")
      throw std::runtime_error("unknown checkpoint format");
    const auto& arch = header.at("arch");
    build_shape(p, arch.at("data_dim").get<int>(), arch.at("hidden").get<int>(),
                arch.at("embed").get<int>());
    meta.kind = header.at("kind").get<std::string>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.step = header.at("step").get<long>();
    meta.schedule = header.at("schedule");
    meta.config_hash = header.value("config_hash", "");
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid checkpoint header in " + path + ": " + e.what());
  }
  if (payload.size() != p.theta.size())
    throw std::runtime_error("checkpoint payload mismatch in " + path + ": expected " +
                             std::to_string(p.theta.size()) + " floats, got " +
                             std::to_string(payload.size()));
  p.theta = std::move(payload);
  p.version = 1;
  return {std::move(p), std::move(meta)};
}

}  // namespace dualdiff
