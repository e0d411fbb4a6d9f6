#include "exitflow/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "exitflow/digest.hpp"

namespace exitflow {

using nlohmann::json;

void write_tensor(const std::string& path, std::span<const double> data,
                  const std::vector<std::int64_t>& shape,
                  const std::vector<std::string>& axis_names) {
  std::int64_t expect = 1;
  for (auto s : shape) expect *= s;
  if (expect != static_cast<std::int64_t>(data.size()))
    throw ConfigInvalid("tensor shape does not match data size for " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigInvalid("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  json meta;
  meta["dtype"] = "float64-le";
  meta["shape"] = shape;
  if (!axis_names.empty()) meta["axes"] = axis_names;
  meta["fnv1a64"] = fnv1a64(data);
  std::ofstream side(path + ".json");
  side << meta.dump(2) << "\n";
}

std::vector<double> read_tensor(const std::string& path,
                                std::vector<std::int64_t>* shape) {
  std::ifstream side(path + ".json");
  if (!side) throw ConfigInvalid("missing tensor sidecar for " + path);
  json meta = json::parse(side);
  std::int64_t expect = 1;
  std::vector<std::int64_t> sh = meta.at("shape").get<std::vector<std::int64_t>>();
  for (auto s : sh) expect *= s;
  if (shape) *shape = sh;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("cannot read " + path);
  std::vector<double> data(static_cast<size_t>(expect));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw ConfigInvalid("short read on " + path);
  return data;
}

void write_trajectories_csv(const std::string& path,
                            const std::vector<Trajectory>& trajs) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigInvalid("cannot write " + path);
  std::fputs("id,t,x,y,ux,uy\n", f);
  for (size_t id = 0; id < trajs.size(); ++id) {
    for (const auto& s : trajs[id].samples) {
      std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", id, s.t, s.x.x,
                   s.x.y, s.u.x, s.u.y);
    }
  }
  std::fclose(f);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot write " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

JsonlLogger::JsonlLogger(const std::string& path) : path_(path) {
  std::ofstream out(path_, std::ios::trunc);
}

void JsonlLogger::append(const std::string& json_object) {
  std::ofstream out(path_, std::ios::app);
  out << json_object << "\n";
}

void Manifest::add_artifact(const std::string& name,
                            std::span<const double> data) {
  artifacts_.push_back({name, fnv1a64(data)});
}

void Manifest::add_artifact_bytes(const std::string& name, const void* data,
                                  std::size_t bytes) {
  Fnv1a64 d;
  d.update(data, bytes);
  artifacts_.push_back({name, d.value()});
}

std::string Manifest::to_json() const {
  auto sorted = artifacts_;
  std::sort(sorted.begin(), sorted.end());
  json j;
  j["artifacts"] = json::array();
  for (const auto& [name, digest] : sorted) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(digest));
    j["artifacts"].push_back({{"name", name}, {"fnv1a64", hex}});
  }
  char cfg_hex[24];
  std::snprintf(cfg_hex, sizeof(cfg_hex), "%016llx",
                static_cast<unsigned long long>(config_digest_));
  j["config_digest"] = cfg_hex;
  j["seed"] = seed_;
  j["outcome"] = outcome_;
  j["wall_seconds"] = wall_seconds_;
  return j.dump(2);
}

std::uint64_t Manifest::deterministic_digest() const {
  auto sorted = artifacts_;
  std::sort(sorted.begin(), sorted.end());
  Fnv1a64 d;
  for (const auto& [name, digest] : sorted) {
    d.update(name);
    d.update(&digest, sizeof(digest));
  }
  d.update(&config_digest_, sizeof(config_digest_));
  d.update(&seed_, sizeof(seed_));
  d.update(outcome_);
  return d.value();
}

void Manifest::save(const std::string& path) const {
  write_text_file(path, to_json() + "\n");
}

}  // namespace exitflow
