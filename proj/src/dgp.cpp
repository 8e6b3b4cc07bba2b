#include "cate_ebm/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cate_ebm/error.hpp"

namespace cate_ebm {

std::size_t Dataset::treated_count() const {
  std::size_t t = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) t += a(i) == 1.0 ? 1 : 0;
  return t;
}

void Dataset::validate() const {
  const Eigen::Index n = x.rows();
  if (a.size() != n || y.size() != n) throw dimension_error("dataset: X, A and Y lengths differ");
  for (Eigen::Index i = 0; i < n; ++i)
    if (a(i) != 0.0 && a(i) != 1.0)
      throw input_error("dataset: non-binary treatment in row " + std::to_string(i + 1));
  const std::size_t t = treated_count();
  if (t == 0 || t == size()) throw empty_arm_error("dataset: treated or control group is empty");
  if (oracle && oracle->tau.size() != n) throw dimension_error("dataset: oracle length differs");
}

Dataset Dataset::rows(const std::vector<std::size_t>& idx) const {
  auto take = [&](const Vector& v) {
    if (v.size() == 0) return Vector();
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
    return out;
  };
  auto take_rows = [&](const Matrix& m) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
    return out;
  };
  Dataset out;
  out.x = take_rows(x);
  out.a = take(a);
  out.y = take(y);
  if (oracle) {
    OracleBlock o;
    o.tau = take(oracle->tau);
    o.mu0 = take(oracle->mu0);
    o.mu1 = take(oracle->mu1);
    o.pi = take(oracle->pi);
    o.u = take_rows(oracle->u);
    o.outcome_noise = take(oracle->outcome_noise);
    out.oracle = std::move(o);
  }
  return out;
}

Dataset Dataset::with_features(Matrix features) const {
  if (features.rows() != x.rows()) throw dimension_error("with_features: row count differs");
  Dataset out = *this;
  out.x = std::move(features);
  return out;
}

namespace {

double scalar_out(const MlpNet& net, const Eigen::Ref<const Vector>& u) {
  return net.forward(Vector(u))(0);
}

} // namespace

double DgpSpec::mu0(const Eigen::Ref<const Vector>& u) const { return std::exp(scalar_out(mu0_net, u)); }
double DgpSpec::mu1(const Eigen::Ref<const Vector>& u) const { return std::exp(scalar_out(mu1_net, u)); }
double DgpSpec::pi(const Eigen::Ref<const Vector>& u) const {
  return 1.0 / (1.0 + std::exp(-scalar_out(pi_net, u)));
}

DgpSpec gen_dgp(std::uint64_t seed, std::size_t d, std::size_t latent_dim) {
  if (d == 0) throw invalid_dimension_error("gen_dgp: d must be >= 1");
  if (latent_dim == 0) throw invalid_dimension_error("gen_dgp: latent dimension must be >= 1");
  const SeededRng root(seed);
  DgpSpec spec;
  spec.latent_dim = latent_dim;
  spec.d = d;
  spec.seed = seed;
  SeededRng g_rng = root.split(1);
  spec.g = MlpNet::random({latent_dim, 16, 16, 16, d}, g_rng, 1.0, 1.0);
  SeededRng mu0_rng = root.split(2);
  spec.mu0_net = MlpNet::random({latent_dim, 1}, mu0_rng, 1.0, 1.0);
  SeededRng mu1_rng = root.split(3);
  spec.mu1_net = MlpNet::random({latent_dim, 1}, mu1_rng, 1.0, 1.0);
  // Half-scale logits keep pi(U) inside the overlap margin for large samples.
  SeededRng pi_rng = root.split(4);
  spec.pi_net = MlpNet::random({latent_dim, 1}, pi_rng, 0.5, 0.5);
  return spec;
}

Dataset sample(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw too_few_samples_error("sample: n must be >= 2");
  const auto rows = static_cast<Eigen::Index>(n);
  const auto latent = static_cast<Eigen::Index>(dgp.latent_dim);
  for (int attempt = 0; attempt < 5; ++attempt) {
    SeededRng rng = SeededRng(seed).split(static_cast<std::uint64_t>(attempt));
    Dataset data;
    OracleBlock o;
    data.x.resize(rows, static_cast<Eigen::Index>(dgp.d));
    data.a.resize(rows);
    data.y.resize(rows);
    o.u.resize(rows, latent);
    o.tau.resize(rows);
    o.mu0.resize(rows);
    o.mu1.resize(rows);
    o.pi.resize(rows);
    o.outcome_noise.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      Vector u(latent);
      for (Eigen::Index j = 0; j < latent; ++j) u(j) = rng.normal();
      const Vector gx = dgp.g.forward(u);
      for (Eigen::Index j = 0; j < gx.size(); ++j) data.x(i, j) = gx(j) + rng.normal();
      const double m0 = dgp.mu0(u);
      const double m1 = dgp.mu1(u);
      const double p = dgp.pi(u);
      if (!(p > kOverlapMargin && p < 1.0 - kOverlapMargin))
        throw numeric_error("sample: propensity " + std::to_string(p) + " violates the overlap margin");
      const double treat = rng.bernoulli(p) ? 1.0 : 0.0;
      const double eps = rng.normal();
      const double mean = dgp.literal_outcome ? treat * m0 + (1.0 - treat) * m1
                                              : treat * m1 + (1.0 - treat) * m0;
      data.a(i) = treat;
      data.y(i) = mean + eps;
      o.u.row(i) = u.transpose();
      o.mu0(i) = m0;
      o.mu1(i) = m1;
      o.tau(i) = m1 - m0;
      o.pi(i) = p;
      o.outcome_noise(i) = eps;
    }
    data.oracle = std::move(o);
    const std::size_t t = data.treated_count();
    if (t > 0 && t < n) return data;
  }
  throw numeric_error("sample: every draw had an empty treatment arm; choose another seed");
}

Dataset dataset_from_table(const CsvTable& table, const CsvSchema& schema, const std::string& origin) {
  auto column = [&](const std::string& name) -> Eigen::Index {
    const long c = table.find(name);
    if (c < 0) throw csv_error(origin + ": missing column '" + name + "'");
    return static_cast<Eigen::Index>(c);
  };

  std::vector<Eigen::Index> cov;
  if (schema.covariates.empty()) {
    std::map<long, Eigen::Index> numbered;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const std::string& h = table.header[c];
      if (h.size() > 1 && h[0] == 'x' &&
          std::all_of(h.begin() + 1, h.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
        numbered[std::stol(h.substr(1))] = static_cast<Eigen::Index>(c);
    }
    for (const auto& [_, c] : numbered) cov.push_back(c);
    if (cov.empty()) throw csv_error(origin + ": no covariate columns (x0, x1, ...)");
  } else {
    for (const auto& name : schema.covariates) cov.push_back(column(name));
  }
  const Eigen::Index ca = column(schema.treatment);
  const Eigen::Index cy = column(schema.outcome);

  const Eigen::Index n = table.values.rows();
  Dataset data;
  data.x.resize(n, static_cast<Eigen::Index>(cov.size()));
  for (std::size_t j = 0; j < cov.size(); ++j) data.x.col(static_cast<Eigen::Index>(j)) = table.values.col(cov[j]);
  data.a = table.values.col(ca);
  data.y = table.values.col(cy);
  for (Eigen::Index i = 0; i < n; ++i)
    if (data.a(i) != 0.0 && data.a(i) != 1.0)
      throw csv_error(origin + ": non-binary treatment value " + format_double(data.a(i)) + " in row " +
                      std::to_string(i + 1));

  const long ct = table.find("tau");
  if (ct >= 0) {
    OracleBlock o;
    o.tau = table.values.col(ct);
    auto optional_col = [&](const char* name) {
      const long c = table.find(name);
      return c >= 0 ? Vector(table.values.col(c)) : Vector();
    };
    o.mu0 = optional_col("mu0");
    o.mu1 = optional_col("mu1");
    o.pi = optional_col("pi");
    std::vector<Eigen::Index> ucols;
    for (std::size_t j = 0;; ++j) {
      const long c = table.find("u" + std::to_string(j));
      if (c < 0) break;
      ucols.push_back(static_cast<Eigen::Index>(c));
    }
    o.u.resize(n, static_cast<Eigen::Index>(ucols.size()));
    for (std::size_t j = 0; j < ucols.size(); ++j) o.u.col(static_cast<Eigen::Index>(j)) = table.values.col(ucols[j]);
    data.oracle = std::move(o);
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  return dataset_from_table(read_csv(path), schema, path.string());
}

CsvTable dataset_table(const Dataset& data) {
  CsvTable t;
  t.header = numbered_names("x", data.dim());
  t.header.push_back("a");
  t.header.push_back("y");
  std::vector<const Vector*> extra;
  if (data.oracle) {
    const auto& o = *data.oracle;
    t.header.push_back("tau");
    extra.push_back(&o.tau);
    if (o.mu0.size()) { t.header.push_back("mu0"); extra.push_back(&o.mu0); }
    if (o.mu1.size()) { t.header.push_back("mu1"); extra.push_back(&o.mu1); }
    if (o.pi.size()) { t.header.push_back("pi"); extra.push_back(&o.pi); }
    for (const auto& name : numbered_names("u", static_cast<std::size_t>(o.u.cols()))) t.header.push_back(name);
  }
  const Eigen::Index n = data.x.rows();
  t.values.resize(n, static_cast<Eigen::Index>(t.header.size()));
  Eigen::Index c = 0;
  t.values.leftCols(data.x.cols()) = data.x;
  c = data.x.cols();
  t.values.col(c++) = data.a;
  t.values.col(c++) = data.y;
  for (const Vector* v : extra) t.values.col(c++) = *v;
  if (data.oracle && data.oracle->u.cols() > 0) t.values.rightCols(data.oracle->u.cols()) = data.oracle->u;
  return t;
}

void save_csv(const std::filesystem::path& path, const Dataset& data, std::vector<std::string> comments) {
  CsvTable table = dataset_table(data);
  table.comments = std::move(comments);
  write_csv(path, table);
}

} // namespace cate_ebm
