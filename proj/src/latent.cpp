#include "lipflow/latent.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "lipflow/rng.hpp"

namespace lipflow::latent {

LatentMap pca_fit(const Matrix& data, int latent_dim) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 1 || d < 1) throw InvalidArgument("pca_fit: empty data");
  if (latent_dim < 1 || latent_dim > std::min(n, d))
    throw InvalidArgument("pca_fit: latent dimension must be in [1, min(N, d)]");
  if (!data.allFinite()) throw InvalidArgument("pca_fit: non-finite data");

  LatentMap map;
  map.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - map.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  const double denom = static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  const Vector all_eig = s.array().square() / denom;
  map.total_variance = all_eig.sum();
  map.eigenvalues = all_eig.head(latent_dim);

  const double floor = 1e-12 * std::max(s.size() ? s(0) : 0.0, 1e-300);
  Eigen::Index rank = 0;
  while (rank < latent_dim && s(rank) > floor) ++rank;
  Matrix basis(d, latent_dim);
  basis.leftCols(rank) = svd.matrixV().leftCols(rank);
  if (rank < latent_dim) {
    map.degenerate = true;
    // Complete with the orthogonal complement of the well-determined part.
    Matrix seed_cols = Matrix::Zero(d, std::max<Eigen::Index>(rank, 1));
    if (rank > 0) seed_cols = basis.leftCols(rank);
    else seed_cols(0, 0) = 1.0;
    Eigen::HouseholderQR<Matrix> qr(seed_cols);
    const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Eigen::Index start = rank > 0 ? rank : 0;
    basis.rightCols(latent_dim - rank) = q.middleCols(start, latent_dim - rank);
    for (Eigen::Index k = rank; k < latent_dim; ++k) map.eigenvalues(k) = 0.0;
  }
  for (Eigen::Index k = 0; k < latent_dim; ++k) {
    Eigen::Index arg = 0;
    basis.col(k).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, k) < 0.0) basis.col(k) = -basis.col(k);
  }
  map.basis = std::move(basis);
  return map;
}

Matrix encode(const LatentMap& map, const Matrix& x) {
  if (x.cols() != map.mean.size()) throw InvalidArgument("encode: dimension mismatch");
  return (x.rowwise() - map.mean.transpose()) * map.basis;
}

Matrix decode(const LatentMap& map, const Matrix& z) {
  if (z.cols() != map.basis.cols()) throw InvalidArgument("decode: dimension mismatch");
  return (z * map.basis.transpose()).rowwise() + map.mean.transpose();
}

double explained_variance_ratio(const LatentMap& map) {
  if (!(map.total_variance > 0.0)) return 1.0;
  return std::clamp(map.eigenvalues.sum() / map.total_variance, 0.0, 1.0);
}

nlohmann::json to_json(const LatentMap& map) {
  nlohmann::json j;
  j["format"] = "lipflow.latent";
  j["version"] = 1;
  j["dim"] = map.dim();
  j["latent_dim"] = map.latent_dim();
  j["mean"] = std::vector<double>(map.mean.data(), map.mean.data() + map.mean.size());
  std::vector<double> rows;
  rows.reserve(static_cast<std::size_t>(map.basis.size()));
  for (Eigen::Index i = 0; i < map.basis.rows(); ++i)
    for (Eigen::Index k = 0; k < map.basis.cols(); ++k) rows.push_back(map.basis(i, k));
  j["basis"] = rows;
  j["eigenvalues"] = std::vector<double>(map.eigenvalues.data(), map.eigenvalues.data() + map.eigenvalues.size());
  j["total_variance"] = map.total_variance;
  j["degenerate"] = map.degenerate;
  return j;
}

LatentMap latent_map_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "lipflow.latent") throw InvalidArgument("latent map: wrong format tag");
    LatentMap map;
    const int d = j.at("dim").get<int>();
    const int k = j.at("latent_dim").get<int>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto basis = j.at("basis").get<std::vector<double>>();
    const auto eig = j.at("eigenvalues").get<std::vector<double>>();
    if (d < 1 || k < 1 || mean.size() != static_cast<std::size_t>(d) ||
        basis.size() != static_cast<std::size_t>(d) * k || eig.size() != static_cast<std::size_t>(k))
      throw InvalidArgument("latent map: inconsistent shapes");
    map.mean = Eigen::Map<const Vector>(mean.data(), d);
    map.basis.resize(d, k);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < k; ++c) map.basis(i, c) = basis[static_cast<std::size_t>(i) * k + c];
    map.eigenvalues = Eigen::Map<const Vector>(eig.data(), k);
    map.total_variance = j.at("total_variance").get<double>();
    map.degenerate = j.value("degenerate", false);
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("latent map: ") + e.what());
  }
}

LatentGpaResult latent_gpa(const ParticleSet& source, const ParticleSet& target, int latent_dim,
                           const transport::TransportConfig& cfg, int dpi_inner_steps,
                           const transport::StepObserver& observer) {
  if (source.dim() != target.dim()) throw InvalidArgument("latent_gpa: source and target dimensions differ");
  if (latent_dim < 1 || latent_dim > source.dim())
    throw InvalidArgument("latent_gpa: latent dimension must be in [1, d]");
  if (dpi_inner_steps < 0) throw InvalidArgument("latent_gpa: dpi_inner_steps must be >= 0");

  LatentGpaResult out;
  Matrix both(source.size() + target.size(), source.dim());
  both.topRows(source.size()) = source.positions;
  both.bottomRows(target.size()) = target.positions;
  out.map = pca_fit(both, latent_dim);

  ParticleSet zs{encode(out.map, source.positions), Role::source, source.seed};
  ParticleSet zt{encode(out.map, target.positions), Role::target, target.seed};
  transport::StepObserver decoded_observer;
  if (observer)
    decoded_observer = [&](const transport::StepRecord& rec, const Matrix& z) { observer(rec, decode(out.map, z)); };
  out.latent_run = transport::gpa_run(zs, zt, cfg, decoded_observer);
  out.decoded.positions = decode(out.map, out.latent_run.particles.positions);
  out.decoded.role = Role::generated;
  out.decoded.seed = source.seed;

  DpiReport& rep = out.dpi;
  const Matrix recon = decode(out.map, zt.positions);
  rep.reconstruction_error = target.size() ? (recon - target.positions).rowwise().norm().maxCoeff() : 0.0;
  const double scale = 1.0 + (target.size() ? target.positions.cwiseAbs().maxCoeff() : 0.0);
  rep.reconstruction_exact = rep.reconstruction_error <= 1e-8 * scale;
  if (dpi_inner_steps == 0 || out.latent_run.log.termination == transport::Termination::diverged) return out;

  const auto ambient_net = netdisc::DiscriminatorNet::init(cfg.net_config(static_cast<int>(source.dim())),
                                                           derive_seed(cfg.seed, 0xA11B));
  const auto latent_net = netdisc::DiscriminatorNet::init(cfg.net_config(latent_dim), derive_seed(cfg.seed, 0x1A7E));
  rep.ambient_estimate =
      fdiv::estimate_divergence(cfg.fdiv, ambient_net, out.decoded.positions, target.positions, dpi_inner_steps, cfg.adam)
          .first.divergence_estimate;
  rep.latent_estimate = fdiv::estimate_divergence(cfg.fdiv, latent_net, out.latent_run.particles.positions,
                                                  zt.positions, dpi_inner_steps, cfg.adam)
                            .first.divergence_estimate;
  rep.asserted = rep.reconstruction_exact;
  rep.holds = rep.ambient_estimate <= rep.latent_estimate + rep.tolerance;
  return out;
}

}  // namespace lipflow::latent
