// Evaluation report: Fréchet distance between a generated and a reference
// feature set, rendered as key=value text and as JSON. Scaled values follow
// the x1e4 reporting convention; the raw distance is always included.
#pragma once

#include <json.hpp>

#include <sstream>

#include "mmdiff/frechet.hpp"

namespace mmdiff {

struct EvalReport {
  std::string extractor_id;
  long n_gen = 0, n_ref = 0;
  int dim = 0;
  double fd_raw = 0;
  double fd_scaled = 0;  // fd_raw * 1e4
  bool regularized = false;
  std::vector<std::pair<std::string, std::string>> extra;
};

inline EvalReport make_eval_report(
    const FeatureSet& gen, const FeatureSet& ref,
    const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  FrechetResult r = frechet_distance_full(gen, ref);
  EvalReport rep;
  rep.extractor_id = gen.extractor_id;
  rep.n_gen = gen.features.rows();
  rep.n_ref = ref.features.rows();
  rep.dim = static_cast<int>(gen.features.cols());
  rep.fd_raw = r.value;
  rep.fd_scaled = r.value * 1e4;
  rep.regularized = r.regularized;
  rep.extra = extra;
  return rep;
}

inline std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "extractor = " << r.extractor_id << "\n"
     << "n_gen = " << r.n_gen << "\n"
     << "n_ref = " << r.n_ref << "\n"
     << "dim = " << r.dim << "\n"
     << "fd_raw = " << r.fd_raw << "\n"
     << "fd_scaled_1e4 = " << r.fd_scaled << "\n"
     << "regularized = " << (r.regularized ? "true" : "false") << "\n";
  for (const auto& [k, v] : r.extra) os << k << " = " << v << "\n";
  return os.str();
}

inline std::string report_json(const EvalReport& r) {
  nlohmann::json j = {{"extractor", r.extractor_id}, {"n_gen", r.n_gen},
                      {"n_ref", r.n_ref},            {"dim", r.dim},
                      {"fd_raw", r.fd_raw},          {"fd_scaled_1e4", r.fd_scaled},
                      {"regularized", r.regularized}};
  for (const auto& [k, v] : r.extra) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace mmdiff
