#include "cate_ebm/reducers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cate_ebm/error.hpp"
#include "cate_ebm/rng.hpp"

namespace cate_ebm {

PcaProjector pca_fit(const Matrix& x, std::size_t k) {
  const auto d = static_cast<std::size_t>(x.cols());
  if (k == 0 || k > d)
    throw invalid_dimension_error("pca_fit: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(d) + "]");
  if (x.rows() < 2) throw too_few_samples_error("pca_fit: needs at least 2 rows");
  PcaProjector p;
  p.mean = column_means(x);
  const Eigen::MatrixXd centered = x.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows());
  const SymmetricEigen eig = jacobi_eigen(cov);
  p.components = eig.vectors.leftCols(static_cast<Eigen::Index>(k));
  p.variances = eig.values.head(static_cast<Eigen::Index>(k));
  return p;
}

Matrix PcaProjector::transform(const Matrix& x) const {
  if (x.cols() != mean.size()) throw dimension_error("PCA transform: column count differs");
  return (x.rowwise() - mean.transpose()) * components;
}

Matrix PcaProjector::reconstruct(const Matrix& codes) const {
  if (codes.cols() != components.cols()) throw dimension_error("PCA reconstruct: code width differs");
  Matrix out = codes * components.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

namespace {

struct AeLoss {
  double value = 0.0;
  std::vector<double> enc_grad;
  std::vector<double> dec_grad;
};

// Mean over rows of the squared reconstruction error summed over features.
AeLoss ae_loss(const MlpNet& enc, const MlpNet& dec, const Matrix& batch, bool with_grad) {
  AeLoss out;
  MlpNet::Tape enc_tape, dec_tape;
  const Matrix code = enc.forward(batch, enc_tape);
  const Matrix recon = dec.forward(code, dec_tape);
  const Matrix diff = recon - batch;
  const double n = static_cast<double>(batch.rows());
  out.value = diff.squaredNorm() / n;
  if (with_grad) {
    const Matrix upstream = (2.0 / n) * diff;
    Matrix code_grad;
    out.dec_grad = dec.backward(dec_tape, upstream, &code_grad);
    out.enc_grad = enc.backward(enc_tape, code_grad);
  }
  return out;
}

} // namespace

AutoEncoder ae_fit(const Matrix& x, std::size_t k, const AeConfig& config) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (k == 0 || k > d) throw invalid_dimension_error("ae_fit: k must lie in [1, d]");
  if (config.epochs == 0 || config.batch_size == 0 || config.patience == 0)
    throw config_error("ae_fit: epochs, batch size and patience must be >= 1");
  if (n < 2) throw too_few_samples_error("ae_fit: needs at least 2 rows");

  const SeededRng master(config.seed);
  std::vector<std::size_t> enc_widths{d};
  enc_widths.insert(enc_widths.end(), config.hidden.begin(), config.hidden.end());
  enc_widths.push_back(k);
  std::vector<std::size_t> dec_widths(enc_widths.rbegin(), enc_widths.rend());
  SeededRng enc_rng = master.split(1);
  SeededRng dec_rng = master.split(2);
  AutoEncoder ae;
  ae.encoder = MlpNet::random(enc_widths, enc_rng, std::sqrt(2.0), 1.0);
  ae.decoder = MlpNet::random(dec_widths, dec_rng, std::sqrt(2.0), 1.0);

  SeededRng split_rng = master.split(3);
  const std::vector<std::size_t> perm = split_rng.permutation(n);
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  Matrix val(static_cast<Eigen::Index>(n_val), x.cols());
  for (std::size_t i = 0; i < n_val; ++i) val.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(perm[i]));

  AdamState enc_adam(ae.encoder.parameter_count(), AdamConfig{config.learning_rate});
  AdamState dec_adam(ae.decoder.parameter_count(), AdamConfig{config.learning_rate});
  std::vector<double> best_enc(ae.encoder.params().begin(), ae.encoder.params().end());
  std::vector<double> best_dec(ae.decoder.params().begin(), ae.decoder.params().end());
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    SeededRng order_rng = master.split(1000 + epoch);
    std::vector<std::size_t> order = train_rows;
    order_rng.shuffle(order);
    double train_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      Matrix batch(static_cast<Eigen::Index>(len), x.cols());
      for (std::size_t i = 0; i < len; ++i) batch.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
      const AeLoss loss = ae_loss(ae.encoder, ae.decoder, batch, true);
      if (!std::isfinite(loss.value))
        throw training_diverged_error(static_cast<long>(epoch) - 1, "autoencoder diverged");
      enc_adam.step(ae.encoder.params(), loss.enc_grad);
      dec_adam.step(ae.decoder.params(), loss.dec_grad);
      train_sum += loss.value * static_cast<double>(len);
    }
    const double val_loss = n_val > 0 ? ae_loss(ae.encoder, ae.decoder, val, false).value
                                      : train_sum / static_cast<double>(order.size());
    if (!std::isfinite(val_loss)) throw training_diverged_error(static_cast<long>(epoch) - 1, "autoencoder diverged");
    if (val_loss < best) {
      best = val_loss;
      best_enc.assign(ae.encoder.params().begin(), ae.encoder.params().end());
      best_dec.assign(ae.decoder.params().begin(), ae.decoder.params().end());
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  std::copy(best_enc.begin(), best_enc.end(), ae.encoder.params().begin());
  std::copy(best_dec.begin(), best_dec.end(), ae.decoder.params().begin());
  ae.best_val_loss = best;
  const Standardized stats = standardize_columns(ae.encoder.forward(x));
  ae.code_mean = stats.mean;
  ae.code_std = stats.std;
  return ae;
}

Matrix AutoEncoder::encode(const Matrix& x, bool standardized) const {
  Matrix codes = encoder.forward(x);
  if (!standardized) return codes;
  return apply_standardization(codes, code_mean, code_std);
}

Matrix AutoEncoder::reconstruct(const Matrix& x) const { return decoder.forward(encoder.forward(x)); }

} // namespace cate_ebm
