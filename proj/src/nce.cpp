#include "cate_ebm/nce.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "cate_ebm/error.hpp"

namespace cate_ebm {

CorruptionSpec CorruptionSpec::all_continuous(std::size_t d, double rho, std::size_t b) {
  return CorruptionSpec{rho, std::vector<FeatureKind>(d, FeatureKind::continuous()), b};
}

void CorruptionSpec::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw config_error("corruption probability must lie in (0, 1]");
  if (b == 0) throw config_error("number of corrupted candidates b must be >= 1");
  for (std::size_t f = 0; f < kinds.size(); ++f)
    if (kinds[f].categorical && kinds[f].values.empty())
      throw config_error("categorical feature " + std::to_string(f) + " has an empty value set");
}

std::uint64_t CorruptionSpec::hash() const {
  std::uint64_t h = splitmix64(std::bit_cast<std::uint64_t>(rho));
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ kinds.size());
  for (const auto& kind : kinds) {
    h = splitmix64(h ^ (kind.categorical ? 1u : 0u));
    for (double v : kind.values) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

Vector corrupt(const Eigen::Ref<const Vector>& x, const CorruptionSpec& spec, SeededRng& rng) {
  if (spec.kinds.size() != static_cast<std::size_t>(x.size()))
    throw dimension_error("corrupt: feature kinds do not match input dimension");
  Vector out = x;
  for (Eigen::Index f = 0; f < x.size(); ++f) {
    if (!rng.bernoulli(spec.rho)) continue;
    const FeatureKind& kind = spec.kinds[static_cast<std::size_t>(f)];
    if (kind.categorical)
      out(f) = kind.values[rng.uniform_index(kind.values.size())];
    else
      out(f) += rng.normal();
  }
  return out;
}

CandidateSet build_candidates(const Eigen::Ref<const Vector>& x, std::size_t subset,
                              const CorruptionSpec& spec, SeededRng& rng) {
  const auto rows = static_cast<Eigen::Index>(spec.b + 1);
  CandidateSet cs;
  cs.subset = subset;
  cs.true_index = rng.uniform_index(spec.b + 1);
  cs.values.resize(rows, x.size());
  // Drawing the clean slot uniformly and filling the rest in order gives the
  // same distribution as permuting (clean, noisy_1, ..., noisy_b).
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<std::size_t>(r) == cs.true_index)
      cs.values.row(r) = x.transpose();
    else
      cs.values.row(r) = corrupt(x, spec, rng).transpose();
  }
  return cs;
}

namespace {

struct SoftmaxResult {
  Vector prob;
  double neg_log_true = 0.0;
};

// Softmax with max subtraction; -log p_true computed via log1p so that
// saturated cases keep full relative precision.
SoftmaxResult stable_softmax(const Vector& scores, std::size_t true_index) {
  if (!scores.allFinite()) throw numeric_error("non-finite candidate score");
  Eigen::Index top = 0;
  const double m = scores.maxCoeff(&top);
  Vector e = (scores.array() - m).exp();
  double rest = 0.0;
  for (Eigen::Index c = 0; c < e.size(); ++c)
    if (c != top) rest += e(c);
  SoftmaxResult out;
  out.prob = e / (1.0 + rest);
  const auto t = static_cast<Eigen::Index>(true_index);
  out.neg_log_true = t == top ? std::log1p(rest) : (m - scores(t)) + std::log1p(rest);
  return out;
}

Vector candidate_scores(const Matrix& f, Eigen::Index first, Eigen::Index count,
                        const Eigen::Ref<const Vector>& beta) {
  return f.middleRows(first, count) * beta;
}

} // namespace

Vector posterior(const MlpNet& net, const OrthogonalMatrix& b, const CandidateSet& cs) {
  if (cs.subset >= b.k()) throw dimension_error("posterior: subset index out of range");
  if (static_cast<std::size_t>(cs.values.cols()) != net.input_width())
    throw dimension_error("posterior: candidate dimension does not match network input");
  const Matrix f = net.forward(cs.values);
  return stable_softmax(candidate_scores(f, 0, f.rows(), b.column(cs.subset)), cs.true_index).prob;
}

Vector posterior(const EbmModel& model, const CandidateSet& cs) {
  return posterior(model.net, model.b_matrix, cs);
}

NceLoss nce_loss(const MlpNet& net, const OrthogonalMatrix& b, std::span<const CandidateSet> batch,
                 bool with_grad) {
  if (batch.empty()) throw input_error("nce_loss: empty batch");
  const std::size_t k = b.k();
  if (net.output_width() != k) throw dimension_error("nce_loss: network output width != k");

  std::vector<std::size_t> per_subset(k, 0);
  Eigen::Index total_rows = 0;
  for (const auto& cs : batch) {
    if (cs.subset >= k) throw dimension_error("nce_loss: subset index out of range");
    if (static_cast<std::size_t>(cs.values.cols()) != net.input_width())
      throw dimension_error("nce_loss: candidate dimension does not match network input");
    ++per_subset[cs.subset];
    total_rows += cs.values.rows();
  }
  NceLoss out;
  for (std::size_t c : per_subset) out.subsets_present += c > 0 ? 1 : 0;

  Matrix stacked(total_rows, static_cast<Eigen::Index>(net.input_width()));
  Eigen::Index row = 0;
  for (const auto& cs : batch) {
    stacked.middleRows(row, cs.values.rows()) = cs.values;
    row += cs.values.rows();
  }

  MlpNet::Tape tape;
  const Matrix f = with_grad ? net.forward(stacked, tape) : net.forward(stacked);
  if (!f.allFinite()) throw numeric_error("nce_loss: non-finite network output");

  Matrix upstream;
  if (with_grad) upstream = Matrix::Zero(f.rows(), f.cols());

  const double present = static_cast<double>(out.subsets_present);
  row = 0;
  for (const auto& cs : batch) {
    const auto count = cs.values.rows();
    const auto beta = b.column(cs.subset);
    const SoftmaxResult sm = stable_softmax(candidate_scores(f, row, count, beta), cs.true_index);
    const double weight = 1.0 / (present * static_cast<double>(per_subset[cs.subset]));
    out.value += weight * sm.neg_log_true;
    if (with_grad) {
      for (Eigen::Index c = 0; c < count; ++c) {
        const double coeff =
            weight * (sm.prob(c) - (static_cast<std::size_t>(c) == cs.true_index ? 1.0 : 0.0));
        upstream.row(row + c) = coeff * beta.transpose();
      }
    }
    row += count;
  }
  if (with_grad) out.grad = net.backward(tape, upstream);
  return out;
}

double nce_loss(const EbmModel& model, std::span<const CandidateSet> batch) {
  return nce_loss(model.net, model.b_matrix, batch, false).value;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw config_error("epochs must be >= 1");
  if (batch_size == 0) throw config_error("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw config_error("learning rate must be positive");
  if (b == 0) throw config_error("b must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0)) throw config_error("rho must lie in (0, 1]");
  if (k == 0) throw config_error("k must be >= 1");
  if (patience == 0) throw config_error("patience must be >= 1");
  if (!(weight_decay >= 0.0)) throw config_error("weight decay must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw config_error("validation fraction must lie in [0, 1)");
  for (std::size_t w : hidden)
    if (w == 0) throw config_error("hidden widths must be positive");
}

namespace {

// Orders training rows so that consecutive runs of the order contain each
// subset roughly in proportion to its size.
std::vector<std::size_t> stratified_order(const std::vector<std::size_t>& rows,
                                          const std::vector<std::size_t>& labels, std::size_t k,
                                          SeededRng& rng) {
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t r : rows) groups[labels[r]].push_back(r);
  struct Slot {
    double key;
    std::size_t subset;
    std::size_t row;
  };
  std::vector<Slot> slots;
  slots.reserve(rows.size());
  for (std::size_t j = 0; j < k; ++j) {
    rng.shuffle(groups[j]);
    const double nj = static_cast<double>(groups[j].size());
    for (std::size_t r = 0; r < groups[j].size(); ++r)
      slots.push_back({(static_cast<double>(r) + 0.5) / nj, j, groups[j][r]});
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    return a.key != b.key ? a.key < b.key : a.subset < b.subset;
  });
  std::vector<std::size_t> order;
  order.reserve(slots.size());
  for (const auto& s : slots) order.push_back(s.row);
  return order;
}

std::vector<CandidateSet> draw_candidates(const Matrix& x, const std::vector<std::size_t>& rows,
                                          const std::vector<std::size_t>& labels,
                                          const CorruptionSpec& spec, const SeededRng& stream) {
  std::vector<CandidateSet> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    SeededRng rng = stream.split(r);
    out.push_back(build_candidates(x.row(static_cast<Eigen::Index>(r)).transpose(), labels[r], spec, rng));
  }
  return out;
}

void add_weight_decay(const MlpNet& net, double decay, std::vector<double>& grad) {
  std::size_t offset = 0;
  const auto& widths = net.widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t weights = widths[l] * widths[l + 1];
    for (std::size_t i = offset; i < offset + weights; ++i) grad[i] += decay * net.params()[i];
    offset += weights + widths[l + 1];
  }
}

} // namespace

TrainResult train_ebm(const Matrix& x, const TrainConfig& config, std::optional<OrthogonalMatrix> b,
                      std::vector<FeatureKind> feature_kinds) {
  config.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  const std::size_t k = config.k;
  if (d == 0) throw dimension_error("train_ebm: data has no columns");
  if (n < 2 * k)
    throw too_few_samples_error("train_ebm: need at least 2k = " + std::to_string(2 * k) +
                                " rows, got " + std::to_string(n));
  if (!x.allFinite()) throw input_error("train_ebm: data contains non-finite values");

  CorruptionSpec spec{config.rho,
                      feature_kinds.empty() ? std::vector<FeatureKind>(d, FeatureKind::continuous())
                                            : std::move(feature_kinds),
                      config.b};
  spec.validate();
  if (spec.kinds.size() != d) throw dimension_error("train_ebm: feature kinds do not match data");

  // B and the partition depend only on b_seed so that runs differing in
  // their init seed share the same subsets and coefficient vectors.
  const SeededRng structure(config.b_seed);
  SeededRng partition_rng = structure.split(1);
  PartitionModel partition = kmeans_fit(x, k, partition_rng, {config.kmeans_max_iter, 1e-10});
  if (!b) {
    SeededRng b_rng = structure.split(2);
    b = random_orthogonal(k, b_rng);
  }
  if (b->k() != k) throw dimension_error("train_ebm: B dimension does not match k");

  const SeededRng master(config.seed);
  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(k);
  SeededRng init_rng = master.split(1);
  MlpNet net = MlpNet::random(widths, init_rng, std::sqrt(2.0), 1.0);

  const std::vector<std::size_t> labels = assign_rows(partition, x);
  SeededRng split_rng = master.split(2);
  std::vector<std::size_t> perm = split_rng.permutation(n);
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
  std::vector<std::size_t> val_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const std::vector<CandidateSet> val_sets = draw_candidates(x, val_rows, labels, spec, master.split(3));

  AdamState adam(net.parameter_count(), AdamConfig{config.learning_rate});
  TrainResult result;
  std::vector<double> best_params(net.params().begin(), net.params().end());
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  long last_finite = -1;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.lr_decay)
      adam.set_learning_rate(config.learning_rate * (1.0 - static_cast<double>(epoch - 1) / static_cast<double>(config.epochs)));
    const SeededRng epoch_stream = master.split(1000 + epoch);
    SeededRng order_rng = epoch_stream.split(0xfeed);
    const std::vector<std::size_t> order = stratified_order(train_rows, labels, k, order_rng);
    const std::vector<CandidateSet> sets = draw_candidates(x, order, labels, spec, epoch_stream);

    double train_sum = 0.0;
    for (std::size_t start = 0; start < sets.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, sets.size() - start);
      std::span<const CandidateSet> batch(sets.data() + start, len);
      NceLoss loss;
      try {
        loss = nce_loss(net, *b, batch, true);
        if (!std::isfinite(loss.value)) throw numeric_error("non-finite loss");
        if (config.weight_decay > 0.0) add_weight_decay(net, config.weight_decay, loss.grad);
        adam.step(net.params(), loss.grad);
      } catch (const numeric_error& e) {
        throw training_diverged_error(last_finite, "training diverged in epoch " + std::to_string(epoch) +
                                                       ": " + e.what());
      }
      train_sum += loss.value * static_cast<double>(len);
    }
    const double train_loss = train_sum / static_cast<double>(sets.size());

    double val_loss = train_loss;
    if (!val_sets.empty()) {
      try {
        val_loss = nce_loss(net, *b, val_sets, false).value;
      } catch (const numeric_error& e) {
        throw training_diverged_error(last_finite, "validation diverged in epoch " +
                                                       std::to_string(epoch) + ": " + e.what());
      }
    }
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw training_diverged_error(last_finite, "non-finite loss in epoch " + std::to_string(epoch));
    last_finite = static_cast<long>(epoch);
    result.log.push_back({epoch, train_loss, val_loss});

    if (val_loss < best) {
      best = val_loss;
      result.best_epoch = epoch;
      best_params.assign(net.params().begin(), net.params().end());
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  std::copy(best_params.begin(), best_params.end(), net.params().begin());

  EbmModel& model = result.model;
  model.net = std::move(net);
  model.b_matrix = std::move(*b);
  model.partition = std::move(partition);
  const Standardized stats = standardize_columns(model.net.forward(x));
  model.repr_mean = stats.mean;
  model.repr_std = stats.std;
  model.fingerprint = {d, k, spec.hash(), config.seed, hash_orthogonal(model.b_matrix)};
  result.best_val_loss = best;
  return result;
}

Vector project_to_simplex(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Vector maximize_log_score(const Vector& w, std::size_t steps) {
  if (w.size() == 0 || (w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-9)
    throw invalid_dimension_error("maximize_log_score: w must be a probability vector");
  auto objective = [&](const Vector& q) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < w.size(); ++a)
      if (w(a) > 0.0) s += w(a) * std::log(q(a));
    return s;
  };
  Vector q = Vector::Constant(w.size(), 1.0 / static_cast<double>(w.size()));
  double f = objective(q);
  double step = 1.0;
  for (std::size_t it = 0; it < steps; ++it) {
    const Vector grad = w.cwiseQuotient(q);
    step = std::min(1.0, step * 2.0);
    for (;;) {
      const Vector cand = project_to_simplex(q + step * grad);
      const double fc = (cand.array() > 0.0 || w.array() == 0.0).all() ? objective(cand) : -INFINITY;
      if (fc >= f + 1e-4 * grad.dot(cand - q) || step < 1e-16) {
        if (fc > -INFINITY) {
          q = cand;
          f = fc;
        }
        break;
      }
      step *= 0.5;
    }
  }
  return q;
}

} // namespace cate_ebm
