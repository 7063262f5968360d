#pragma once

#include "latexplain/common.hpp"
#include "latexplain/mlp.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace latexplain {

// Adversarial autoencoder over flat grayscale images. The encoder outputs 2k
// values (k means followed by k log-variances), the decoder maps a latent
// point back to n sigmoid pixels, and the discriminator scores how well a
// latent point matches the standard normal prior.
struct AaeModel {
  Mlp encoder;
  Mlp decoder;
  Mlp discriminator;
  Eigen::Index n = 0;
  Eigen::Index k = 0;
  double validity_threshold = 0.5;
};

AaeModel make_aae(Eigen::Index n, Eigen::Index k,
                  const std::vector<Eigen::Index>& enc_hidden,
                  const std::vector<Eigen::Index>& dec_hidden,
                  const std::vector<Eigen::Index>& disc_hidden,
                  double validity_threshold, std::uint64_t seed);

enum class EncodeMode { mean, sample };

// mean mode returns mu(x); sample mode returns mu(x) + sigma(x)*eta with
// eta ~ N(0,I) drawn from the seed. The explanation pipeline always uses
// mean mode; sampling exists for training.
LatentPoint encode(const AaeModel& model, const Image& x, EncodeMode mode,
                   std::uint64_t seed = 0);
Matrix encode_mean(const AaeModel& model, const Matrix& batch);

Image decode(const AaeModel& model, const LatentPoint& z);
Matrix decode_batch(const AaeModel& model, const Matrix& latents);

double discriminate(const AaeModel& model, const LatentPoint& z);
Vector discriminate_batch(const AaeModel& model, const Matrix& latents);

// Discriminator-then-decoder gate: valid iff discriminate(h) >= threshold,
// and a valid result carries the decoded image.
struct DisdeResult {
  bool valid = false;
  double score = 0.0;
  Image image;
};
DisdeResult disde(const AaeModel& model, const LatentPoint& h, double threshold);

struct AaeTrainConfig {
  TrainConfig recon_cfg;  // encoder+decoder phase; its epoch count drives training
  TrainConfig reg_cfg;    // discriminator and generator phase
  Eigen::Index k = 4;
  double validity_threshold = 0.5;
  std::vector<Eigen::Index> enc_hidden{256, 64};
  std::vector<Eigen::Index> dec_hidden{64, 256};
  std::vector<Eigen::Index> disc_hidden{64, 16};
};

// Two phases per minibatch: (a) reconstruction trains encoder+decoder on
// pixelwise BCE through a sampled latent; (b) regularization trains the
// discriminator on prior-vs-encoded latents, then the encoder as generator
// against a frozen discriminator. Throws TrainingError naming the phase and
// epoch if a loss turns non-finite.
AaeModel train_aae(const Matrix& dataset, const AaeTrainConfig& cfg, std::uint64_t seed);

// RMSE between images and their mean-mode reconstructions, on the 0-255
// pixel scale.
double reconstruction_rmse(const AaeModel& model, const Matrix& dataset);

// Checkpoint: magic "AAE1", little-endian u32 n, u32 k, f64 validity
// threshold, then the encoder, decoder and discriminator MLP1 blocks.
void save_aae(const AaeModel& model, const std::string& path);
void save_aae(const AaeModel& model, std::ostream& out);
AaeModel load_aae(const std::string& path);
AaeModel load_aae(std::istream& in);

}  // namespace latexplain
