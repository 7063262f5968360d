#include "latexplain/aae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace latexplain {

namespace {

void check_latent(const AaeModel& model, const Eigen::Index dim) {
  if (dim != model.k)
    throw ShapeError("latent point has " + std::to_string(dim) + " components, model expects " +
                     std::to_string(model.k));
}

void check_image(const AaeModel& model, const Eigen::Index dim) {
  if (dim != model.n)
    throw ShapeError("image has " + std::to_string(dim) + " pixels, model expects " +
                     std::to_string(model.n));
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = dist(rng);
  return out;
}

std::vector<Eigen::Index> layer_dims(Eigen::Index in, const std::vector<Eigen::Index>& hidden,
                                     Eigen::Index out) {
  std::vector<Eigen::Index> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

std::vector<Activation> relu_stack(std::size_t hidden, Activation final_act) {
  std::vector<Activation> acts(hidden, Activation::relu);
  acts.push_back(final_act);
  return acts;
}

}  // namespace

AaeModel make_aae(Eigen::Index n, Eigen::Index k,
                  const std::vector<Eigen::Index>& enc_hidden,
                  const std::vector<Eigen::Index>& dec_hidden,
                  const std::vector<Eigen::Index>& disc_hidden,
                  double validity_threshold, std::uint64_t seed) {
  if (k >= n) throw ShapeError("make_aae: latent dim must be smaller than pixel count");
  AaeModel model;
  model.n = n;
  model.k = k;
  model.validity_threshold = validity_threshold;
  model.encoder = make_mlp(layer_dims(n, enc_hidden, 2 * k),
                           relu_stack(enc_hidden.size(), Activation::linear),
                           derive_seed(seed, "aae/encoder"));
  model.decoder = make_mlp(layer_dims(k, dec_hidden, n),
                           relu_stack(dec_hidden.size(), Activation::sigmoid),
                           derive_seed(seed, "aae/decoder"));
  model.discriminator = make_mlp(layer_dims(k, disc_hidden, 1),
                                 relu_stack(disc_hidden.size(), Activation::sigmoid),
                                 derive_seed(seed, "aae/discriminator"));
  return model;
}

LatentPoint encode(const AaeModel& model, const Image& x, EncodeMode mode, std::uint64_t seed) {
  check_image(model, x.size());
  const Matrix out = forward(model.encoder, x.transpose());
  const LatentPoint mu = out.row(0).head(model.k).transpose();
  if (mode == EncodeMode::mean) return mu;
  const Vector log_var = out.row(0).tail(model.k).transpose();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  LatentPoint z(model.k);
  for (Eigen::Index i = 0; i < model.k; ++i)
    z(i) = mu(i) + std::exp(0.5 * log_var(i)) * dist(rng);
  return z;
}

Matrix encode_mean(const AaeModel& model, const Matrix& batch) {
  check_image(model, batch.cols());
  const Matrix out = forward(model.encoder, batch);
  return out.leftCols(model.k);
}

Image decode(const AaeModel& model, const LatentPoint& z) {
  check_latent(model, z.size());
  return forward(model.decoder, z.transpose()).row(0).transpose();
}

Matrix decode_batch(const AaeModel& model, const Matrix& latents) {
  check_latent(model, latents.cols());
  return forward(model.decoder, latents);
}

double discriminate(const AaeModel& model, const LatentPoint& z) {
  check_latent(model, z.size());
  return forward(model.discriminator, z.transpose())(0, 0);
}

Vector discriminate_batch(const AaeModel& model, const Matrix& latents) {
  check_latent(model, latents.cols());
  return forward(model.discriminator, latents).col(0);
}

DisdeResult disde(const AaeModel& model, const LatentPoint& h, double threshold) {
  if (threshold < 0.0 || threshold > 1.0)
    throw ConfigError("disde: threshold must lie in [0,1]");
  DisdeResult result;
  result.score = discriminate(model, h);
  result.valid = result.score >= threshold;
  if (result.valid) result.image = decode(model, h);
  return result;
}

AaeModel train_aae(const Matrix& dataset, const AaeTrainConfig& cfg, std::uint64_t seed) {
  if (dataset.rows() == 0) throw TrainingError("train_aae: empty dataset");
  if (dataset.minCoeff() < 0.0 || dataset.maxCoeff() > 1.0)
    throw TrainingError("train_aae: pixel values outside [0,1]");
  const Eigen::Index n = dataset.cols();
  const Eigen::Index k = cfg.k;
  AaeModel model = make_aae(n, k, cfg.enc_hidden, cfg.dec_hidden, cfg.disc_hidden,
                            cfg.validity_threshold, derive_seed(seed, "aae/init"));

  OptimizerState enc_recon_state, dec_state, disc_state, enc_gen_state;
  std::mt19937_64 rng(derive_seed(seed, "aae/train"));

  const Eigen::Index count = dataset.rows();
  const int batch_size = std::max(1, cfg.recon_cfg.batch_size);
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);

  auto fail = [](const char* phase, int epoch) {
    throw TrainingError(std::string("train_aae: ") + phase + " loss diverged at epoch " +
                        std::to_string(epoch));
  };

  for (int epoch = 0; epoch < cfg.recon_cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < count; start += batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(batch_size, count - start);
      Matrix batch(b, n);
      for (Eigen::Index i = 0; i < b; ++i)
        batch.row(i) = dataset.row(order[static_cast<std::size_t>(start + i)]);

      // Reconstruction phase: encoder+decoder through a sampled latent.
      {
        const ForwardTrace enc_trace = forward_trace(model.encoder, batch);
        const Matrix& enc_out = enc_trace.output();
        const Matrix mu = enc_out.leftCols(k);
        const Matrix log_var = enc_out.rightCols(k);
        const Matrix eta = standard_normal(b, k, rng);
        const Matrix sigma = (0.5 * log_var.array()).exp().matrix();
        const Matrix z = mu + sigma.cwiseProduct(eta);

        const ForwardTrace dec_trace = forward_trace(model.decoder, z);
        const double recon_loss = loss_value(dec_trace.output(), batch, Loss::bce);
        if (!std::isfinite(recon_loss)) fail("reconstruction", epoch);

        Gradients dec_grads;
        const Matrix grad_z = backward_loss(model.decoder, dec_trace, batch, Loss::bce, dec_grads);

        Matrix grad_enc_out(b, 2 * k);
        grad_enc_out.leftCols(k) = grad_z;
        grad_enc_out.rightCols(k) =
            0.5 * grad_z.cwiseProduct(sigma).cwiseProduct(eta);
        Gradients enc_grads;
        backward_output(model.encoder, enc_trace, grad_enc_out, enc_grads);

        apply_gradients(model.decoder, dec_grads, cfg.recon_cfg, dec_state);
        apply_gradients(model.encoder, enc_grads, cfg.recon_cfg, enc_recon_state);
      }

      // Regularization phase (a): discriminator on prior (1) vs encoded (0).
      {
        const Matrix prior = standard_normal(b, k, rng);
        const ForwardTrace enc_trace = forward_trace(model.encoder, batch);
        const Matrix mu = enc_trace.output().leftCols(k);
        const Matrix sigma = (0.5 * enc_trace.output().rightCols(k).array()).exp().matrix();
        const Matrix encoded = mu + sigma.cwiseProduct(standard_normal(b, k, rng));

        Matrix disc_batch(2 * b, k);
        disc_batch.topRows(b) = prior;
        disc_batch.bottomRows(b) = encoded;
        Matrix targets = Matrix::Zero(2 * b, 1);
        targets.topRows(b).setOnes();
        const double disc_loss =
            train_step(model.discriminator, disc_batch, targets, Loss::bce, cfg.reg_cfg, disc_state);
        if (!std::isfinite(disc_loss)) fail("regularization/discriminator", epoch);
      }

      // Regularization phase (b): generator step pushes encoded latents
      // toward discriminator output 1; discriminator stays frozen.
      {
        const ForwardTrace enc_trace = forward_trace(model.encoder, batch);
        const Matrix mu = enc_trace.output().leftCols(k);
        const Matrix log_var = enc_trace.output().rightCols(k);
        const Matrix eta = standard_normal(b, k, rng);
        const Matrix sigma = (0.5 * log_var.array()).exp().matrix();
        const Matrix z = mu + sigma.cwiseProduct(eta);

        const ForwardTrace disc_trace = forward_trace(model.discriminator, z);
        const Matrix ones = Matrix::Ones(b, 1);
        const double gen_loss = loss_value(disc_trace.output(), ones, Loss::bce);
        if (!std::isfinite(gen_loss)) fail("regularization/generator", epoch);

        Gradients disc_grads;  // discarded: generator step leaves the discriminator fixed
        const Matrix grad_z =
            backward_loss(model.discriminator, disc_trace, ones, Loss::bce, disc_grads);
        Matrix grad_enc_out(b, 2 * k);
        grad_enc_out.leftCols(k) = grad_z;
        grad_enc_out.rightCols(k) = 0.5 * grad_z.cwiseProduct(sigma).cwiseProduct(eta);
        Gradients enc_grads;
        backward_output(model.encoder, enc_trace, grad_enc_out, enc_grads);
        apply_gradients(model.encoder, enc_grads, cfg.reg_cfg, enc_gen_state);
      }
    }
  }
  return model;
}

double reconstruction_rmse(const AaeModel& model, const Matrix& dataset) {
  if (dataset.rows() == 0) throw ShapeError("reconstruction_rmse: empty dataset");
  check_image(model, dataset.cols());
  const Matrix z = encode_mean(model, dataset);
  const Matrix recon = decode_batch(model, z);
  const double mse = (dataset - recon).squaredNorm() / static_cast<double>(dataset.size());
  return 255.0 * std::sqrt(mse);
}

void save_aae(const AaeModel& model, std::ostream& out) {
  out.write("AAE1", 4);
  const std::uint32_t n = static_cast<std::uint32_t>(model.n);
  const std::uint32_t k = static_cast<std::uint32_t>(model.k);
  char buf[16];
  std::memcpy(buf, &n, 4);
  std::memcpy(buf + 4, &k, 4);
  std::memcpy(buf + 8, &model.validity_threshold, 8);
  out.write(buf, 16);
  save_mlp(model.encoder, out);
  save_mlp(model.decoder, out);
  save_mlp(model.discriminator, out);
}

void save_aae(const AaeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  save_aae(model, out);
}

AaeModel load_aae(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AAE1", 4) != 0)
    throw ParseError("aae checkpoint: bad magic");
  char buf[16];
  in.read(buf, 16);
  if (!in) throw ParseError("aae checkpoint: truncated header");
  std::uint32_t n = 0, k = 0;
  AaeModel model;
  std::memcpy(&n, buf, 4);
  std::memcpy(&k, buf + 4, 4);
  std::memcpy(&model.validity_threshold, buf + 8, 8);
  model.n = n;
  model.k = k;
  model.encoder = load_mlp(in);
  model.decoder = load_mlp(in);
  model.discriminator = load_mlp(in);
  if (model.encoder.output_dim() != 2 * model.k || model.decoder.output_dim() != model.n)
    throw ParseError("aae checkpoint: network dims do not match header");
  return model;
}

AaeModel load_aae(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return load_aae(in);
}

}  // namespace latexplain
