#pragma once

#include <json.hpp>

#include "lipflow/particles.hpp"
#include "lipflow/transport.hpp"

// Linear (PCA) autoencoder: encode(x) = B^T (x - mean), decode(z) = mean + B z
// with B orthonormal, so the decoder is an isometry onto its image.
namespace lipflow::latent {

struct LatentMap {
  Vector mean;         // d
  Matrix basis;        // d x d', orthonormal columns
  Vector eigenvalues;  // d', descending sample-covariance eigenvalues
  double total_variance = 0.0;
  bool degenerate = false;  // some basis vectors were completed arbitrarily

  int dim() const noexcept { return static_cast<int>(basis.rows()); }
  int latent_dim() const noexcept { return static_cast<int>(basis.cols()); }
};

LatentMap pca_fit(const Matrix& data, int latent_dim);

Matrix encode(const LatentMap& map, const Matrix& x);
Matrix decode(const LatentMap& map, const Matrix& z);
double explained_variance_ratio(const LatentMap& map);

nlohmann::json to_json(const LatentMap& map);
LatentMap latent_map_from_json(const nlohmann::json& j);

struct DpiReport {
  double ambient_estimate = 0.0;  // D(decode # P_latent || Q) in R^d
  double latent_estimate = 0.0;   // D(P_latent || encode # Q) in R^d'
  double reconstruction_error = 0.0;  // max_j |decode(encode(q_j)) - q_j|
  bool reconstruction_exact = false;  // error within 1e-8 * scale
  bool holds = false;                 // ambient <= latent + tolerance
  double tolerance = 2e-3;
  bool asserted = false;              // inequality only meaningful with exact reconstruction
};

struct LatentGpaResult {
  ParticleSet decoded;  // transported particles in R^d
  transport::GpaResult latent_run;
  LatentMap map;
  DpiReport dpi;
};

/// Fits PCA on source and target together, runs the transport in latent
/// space, decodes, and estimates both sides of the data-processing bound with
/// fresh discriminators of the same architecture and inner-step budget
/// `dpi_inner_steps` (0 skips the report). The observer sees decoded positions.
LatentGpaResult latent_gpa(const ParticleSet& source, const ParticleSet& target, int latent_dim,
                           const transport::TransportConfig& cfg, int dpi_inner_steps = 0,
                           const transport::StepObserver& observer = {});

}  // namespace lipflow::latent
