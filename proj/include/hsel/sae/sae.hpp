#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/common/rng.hpp"
#include "hsel/model/dataset.hpp"

namespace hsel {

inline constexpr const char* kCheckpointSchema = "hsel.sae/1";

struct SAEConfig {
  int input_dim = 0;
  int latent_dim = 0;
  int K = 1;
  double step_size = 1e-3;
  int batch_size = 256;
  int training_steps = 2000;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int window = 100;
  int divergence_windows = 5;
  double divergence_tolerance = 0.01;  // relative rise of a window mean that counts as an increase

  void validate() const {
    if (input_dim < 1 || latent_dim < 1) throw ConfigError("SAE dimensions must be positive");
    if (K < 1 || K > latent_dim) throw ConfigError("K must lie in [1, latent_dim]");
    if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
    if (batch_size < 1 || training_steps < 0 || window < 1 || divergence_windows < 1)
      throw ConfigError("batch size, step count and window must be positive");
  }
};

inline nlohmann::json to_json(const SAEConfig& c) {
  return {{"input_dim", c.input_dim}, {"latent_dim", c.latent_dim}, {"K", c.K},
          {"step_size", c.step_size}, {"batch_size", c.batch_size}, {"training_steps", c.training_steps},
          {"seed", c.seed},           {"beta1", c.beta1},           {"beta2", c.beta2},
          {"epsilon", c.epsilon},     {"window", c.window},         {"divergence_windows", c.divergence_windows},
          {"divergence_tolerance", c.divergence_tolerance}};
}

inline SAEConfig sae_config_from_json(const nlohmann::json& j) {
  SAEConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.K = j.at("K").get<int>();
  c.step_size = j.value("step_size", c.step_size);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.training_steps = j.value("training_steps", c.training_steps);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.window = j.value("window", c.window);
  c.divergence_windows = j.value("divergence_windows", c.divergence_windows);
  c.divergence_tolerance = j.value("divergence_tolerance", c.divergence_tolerance);
  return c;
}

// code = topK(relu(W_enc (x - b_dec) + b_enc)); x_hat = W_dec code + b_dec.
struct SAEModel {
  Eigen::MatrixXd W_enc;  // latent x input
  Eigen::VectorXd b_enc;
  Eigen::MatrixXd W_dec;  // input x latent, unit columns
  Eigen::VectorXd b_dec;
  SAEConfig config;
  std::vector<double> loss_trace;  // per step, then the full-data loss
  double final_loss = 0.0;
  std::string level;

  int input_dim() const { return static_cast<int>(W_dec.rows()); }
  int latent_dim() const { return static_cast<int>(W_dec.cols()); }
};

namespace detail {

// Keeps the K largest positive entries in place; ties go to the lower index.
inline void keep_top_k(Eigen::Ref<Eigen::VectorXd> v, int K, std::vector<int>& idx) {
  const int m = static_cast<int>(v.size());
  idx.resize(m);
  std::iota(idx.begin(), idx.end(), 0);
  const int k = std::min(K, m);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) { return v(a) > v(b) || (v(a) == v(b) && a < b); });
  std::vector<char> keep(m, 0);
  for (int i = 0; i < k; ++i)
    if (v(idx[i]) > 0.0) keep[idx[i]] = 1;
  for (int i = 0; i < m; ++i)
    if (!keep[i]) v(i) = 0.0;
}

inline Eigen::MatrixXd encode_matrix(const SAEModel& m, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd pre = ((X.rowwise() - m.b_dec.transpose()) * m.W_enc.transpose()).rowwise() + m.b_enc.transpose();
  std::vector<int> idx;
  for (Eigen::Index r = 0; r < pre.rows(); ++r) {
    Eigen::VectorXd row = pre.row(r).transpose().cwiseMax(0.0);
    keep_top_k(row, m.config.K, idx);
    pre.row(r) = row.transpose();
  }
  return pre;
}

struct Adam {
  Eigen::MatrixXd m, v;
  void init(Eigen::Index r, Eigen::Index c) {
    m = Eigen::MatrixXd::Zero(r, c);
    v = Eigen::MatrixXd::Zero(r, c);
  }
  template <class P, class G>
  void step(P& param, const G& grad, const SAEConfig& c, int t) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(c.beta1, t), bc2 = 1.0 - std::pow(c.beta2, t);
    param -= (c.step_size * (m / bc1).array() / ((v / bc2).array().sqrt() + c.epsilon)).matrix();
  }
};

inline void normalize_columns(Eigen::MatrixXd& W) {
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    double n = W.col(j).norm();
    if (n > 0.0) W.col(j) /= n;
  }
}

}  // namespace detail

inline Eigen::MatrixXd encode_rows(const SAEModel& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.input_dim()) throw DomainError("input dimension mismatch");
  return detail::encode_matrix(m, X);
}

inline Eigen::VectorXd encode(const SAEModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.input_dim()) throw DomainError("input dimension mismatch");
  return encode_rows(m, x.transpose()).row(0).transpose();
}

inline Eigen::VectorXd decode(const SAEModel& m, const Eigen::VectorXd& z) {
  if (z.size() != m.latent_dim()) throw DomainError("code dimension mismatch");
  return m.W_dec * z + m.b_dec;
}

// Mean over rows of the per-coordinate squared error.
inline double reconstruction_loss(const SAEModel& m, const Eigen::MatrixXd& X) {
  if (X.rows() == 0) return 0.0;
  Eigen::MatrixXd Z = encode_rows(m, X);
  Eigen::MatrixXd R = (Z * m.W_dec.transpose()).rowwise() + m.b_dec.transpose();
  return (R - X).squaredNorm() / static_cast<double>(X.rows() * X.cols());
}

// Adam on mean squared reconstruction under hard top-K, decoder columns
// renormalized after every step.
inline SAEModel train_sae(const Eigen::MatrixXd& X, const SAEConfig& cfg) {
  cfg.validate();
  if (X.cols() != cfg.input_dim) throw ConfigError("features have " + std::to_string(X.cols()) + " columns, config expects " +
                                                   std::to_string(cfg.input_dim));
  if (X.rows() < cfg.batch_size) throw ConfigError("fewer rows than the batch size");
  Rng rng = make_rng(cfg.seed, 0x5AE);
  const int d = cfg.input_dim, n_lat = cfg.latent_dim, B = cfg.batch_size;

  SAEModel m;
  m.config = cfg;
  m.W_dec.resize(d, n_lat);
  for (Eigen::Index j = 0; j < n_lat; ++j)
    for (Eigen::Index i = 0; i < d; ++i) m.W_dec(i, j) = normal(rng);
  detail::normalize_columns(m.W_dec);
  m.W_enc = m.W_dec.transpose();
  m.b_enc = Eigen::VectorXd::Zero(n_lat);
  m.b_dec = X.colwise().mean().transpose();

  detail::Adam a_we, a_be, a_wd, a_bd;
  a_we.init(n_lat, d);
  a_be.init(n_lat, 1);
  a_wd.init(d, n_lat);
  a_bd.init(d, 1);

  Eigen::MatrixXd Xb(B, d);
  std::vector<double> windows;
  int rising = 0;
  double window_sum = 0.0;
  for (int t = 1; t <= cfg.training_steps; ++t) {
    for (int r = 0; r < B; ++r) Xb.row(r) = X.row(uniform_int(rng, 0, static_cast<int>(X.rows()) - 1));
    Eigen::MatrixXd Xc = Xb.rowwise() - m.b_dec.transpose();
    Eigen::MatrixXd Z = detail::encode_matrix(m, Xb);
    Eigen::MatrixXd R = ((Z * m.W_dec.transpose()).rowwise() + m.b_dec.transpose()) - Xb;
    const double loss = R.squaredNorm() / static_cast<double>(B * d);
    if (!std::isfinite(loss)) {
      m.loss_trace.push_back(loss);
      throw TrainingError("non-finite loss at step " + std::to_string(t), m.loss_trace);
    }
    m.loss_trace.push_back(loss);

    const double scale = 2.0 / static_cast<double>(B * d);
    Eigen::MatrixXd GR = scale * R;                 // B x d
    Eigen::MatrixXd GZ = GR * m.W_dec;              // B x latent
    GZ = GZ.cwiseProduct((Z.array() > 0.0).cast<double>().matrix());
    Eigen::MatrixXd gWd = GR.transpose() * Z;       // d x latent
    Eigen::VectorXd gbd = GR.colwise().sum().transpose() - m.W_enc.transpose() * GZ.colwise().sum().transpose();
    Eigen::MatrixXd gWe = GZ.transpose() * Xc;      // latent x d
    Eigen::VectorXd gbe = GZ.colwise().sum().transpose();

    a_we.step(m.W_enc, gWe, cfg, t);
    a_be.step(m.b_enc, gbe, cfg, t);
    a_wd.step(m.W_dec, gWd, cfg, t);
    a_bd.step(m.b_dec, gbd, cfg, t);
    detail::normalize_columns(m.W_dec);

    window_sum += loss;
    if (t % cfg.window == 0) {
      double mean = window_sum / cfg.window;
      window_sum = 0.0;
      if (!windows.empty() && mean > windows.back() * (1.0 + cfg.divergence_tolerance))
        ++rising;
      else
        rising = 0;
      windows.push_back(mean);
      if (rising >= cfg.divergence_windows)
        throw TrainingError("smoothed loss rose for " + std::to_string(rising) + " consecutive windows", m.loss_trace);
    }
  }
  m.final_loss = reconstruction_loss(m, X);
  m.loss_trace.push_back(m.final_loss);
  return m;
}

inline SAEModel train_sae(const Dataset& features, const SAEConfig& cfg) { return train_sae(features.values, cfg); }

enum class SteerMode { additive, deactivate };

struct SteerSpec {
  int feature = 0;
  double strength = 0.0;
  SteerMode mode = SteerMode::additive;
};

// Bias-free decoder direction of one feature.
inline Eigen::VectorXd feature_direction(const SAEModel& m, int feature) {
  if (feature < 0 || feature >= m.latent_dim()) throw DomainError("feature index " + std::to_string(feature) + " out of range");
  return m.W_dec.col(feature);
}

inline Eigen::VectorXd steer(const SAEModel& m, const Eigen::VectorXd& x, const SteerSpec& s) {
  Eigen::VectorXd dir = feature_direction(m, s.feature);
  if (x.size() != m.input_dim()) throw DomainError("input dimension mismatch");
  if (s.mode == SteerMode::additive) {
    if (s.strength == 0.0) return x;
    return x + s.strength * dir;
  }
  double a = encode(m, x)(s.feature);
  if (a == 0.0) return x;
  return x - a * dir;
}

struct Attribution {
  Eigen::VectorXd map;  // max-normalized |contribution|
  std::vector<char> mask;
  bool empty = false;   // the feature contributes nothing at x
};

inline Attribution attribution_map(const SAEModel& m, int feature, const Eigen::VectorXd& x, double threshold = 0.1) {
  Eigen::VectorXd dir = feature_direction(m, feature);
  Attribution out;
  out.map = (encode(m, x)(feature) * dir).cwiseAbs();
  double mx = out.map.size() ? out.map.maxCoeff() : 0.0;
  out.mask.assign(out.map.size(), 0);
  if (mx <= 0.0) {
    out.empty = true;
    out.map.setZero();
    return out;
  }
  out.map /= mx;
  for (Eigen::Index i = 0; i < out.map.size(); ++i) out.mask[i] = out.map(i) > threshold;
  return out;
}

// Little-endian float32 checkpoint: magic, uint32 header length, JSON header,
// then W_enc, b_enc, W_dec, b_dec in row-major order.
inline void save_checkpoint(const SAEModel& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  nlohmann::json h = {{"schema", kCheckpointSchema},
                      {"input_dim", m.input_dim()},
                      {"latent_dim", m.latent_dim()},
                      {"config", to_json(m.config)},
                      {"final_loss", m.final_loss},
                      {"level", m.level},
                      {"steps", m.loss_trace.size()}};
  std::string hs = h.dump();
  f.write("HSELSAE1", 8);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(hs.size()));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  auto put = [&](const auto& M) {
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      for (Eigen::Index c = 0; c < M.cols(); ++c) {
        float v = static_cast<float>(M(r, c));
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(bits);
      }
  };
  put(m.W_enc);
  put(m.b_enc);
  put(m.W_dec);
  put(m.b_dec);
  if (!f) throw IoError("write failed for " + path);
}

inline SAEModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != "HSELSAE1") throw IoError(path + " is not an SAE checkpoint");
  auto get_u32 = [&]() {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IoError("truncated checkpoint " + path);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 | static_cast<std::uint32_t>(b[2]) << 16 |
           static_cast<std::uint32_t>(b[3]) << 24;
  };
  std::uint32_t len = get_u32();
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  if (!f) throw IoError("truncated checkpoint header " + path);
  auto h = nlohmann::json::parse(hs);
  if (h.at("schema") != kCheckpointSchema) throw IoError("unsupported checkpoint schema");
  SAEModel m;
  m.config = sae_config_from_json(h.at("config"));
  m.final_loss = h.value("final_loss", 0.0);
  m.level = h.value("level", std::string{});
  const int d = h.at("input_dim").get<int>(), L = h.at("latent_dim").get<int>();
  auto get = [&](Eigen::MatrixXd& M, Eigen::Index r, Eigen::Index c) {
    M.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) {
        std::uint32_t bits = get_u32();
        float v;
        std::memcpy(&v, &bits, 4);
        M(i, j) = v;
      }
  };
  Eigen::MatrixXd be, bd;
  get(m.W_enc, L, d);
  get(be, L, 1);
  get(m.W_dec, d, L);
  get(bd, d, 1);
  m.b_enc = be.col(0);
  m.b_dec = bd.col(0);
  return m;
}

}  // namespace hsel
