#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exitflow/density.hpp"
#include "exitflow/trajectories.hpp"

namespace exitflow {

/// Little-endian float64 tensor with a JSON sidecar describing the shape.
void write_tensor(const std::string& path, std::span<const double> data,
                  const std::vector<std::int64_t>& shape,
                  const std::vector<std::string>& axis_names = {});
std::vector<double> read_tensor(const std::string& path,
                                std::vector<std::int64_t>* shape = nullptr);

/// Long-format CSV: id,t,x,y,ux,uy with full double precision.
void write_trajectories_csv(const std::string& path,
                            const std::vector<Trajectory>& trajs);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Append-only JSON-lines iteration log.
class JsonlLogger {
 public:
  explicit JsonlLogger(const std::string& path);
  void append(const std::string& json_object);

 private:
  std::string path_;
};

/// Output manifest: artifact digests keyed by name plus run metadata.
/// Wall-clock timing lives in a separate field so manifests from identical
/// runs compare equal on `artifacts` + `config_digest` + `seed`.
class Manifest {
 public:
  void add_artifact(const std::string& name, std::span<const double> data);
  void add_artifact_bytes(const std::string& name, const void* data,
                          std::size_t bytes);
  void set_config_digest(std::uint64_t digest) { config_digest_ = digest; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_wall_seconds(double s) { wall_seconds_ = s; }
  void set_outcome(const std::string& outcome) { outcome_ = outcome; }

  /// Canonical JSON; artifacts sorted by name.
  std::string to_json() const;
  /// Digest over the deterministic part (artifacts, config, seed, outcome).
  std::uint64_t deterministic_digest() const;
  void save(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::uint64_t>> artifacts_;
  std::uint64_t config_digest_ = 0;
  std::uint64_t seed_ = 0;
  double wall_seconds_ = 0.0;
  std::string outcome_ = "ok";
};

}  // namespace exitflow
