#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "atslg/adaptive.hpp"
#include "atslg/evaluator.hpp"
#include "atslg/gp_engine.hpp"
#include "atslg/offline_library.hpp"

namespace atslg {

using Json = nlohmann::ordered_json;

/// A library together with the inputs it was built from, so that later
/// stages (adaptation, evaluation) can run from the file alone.
struct LibraryBundle {
  Library library;
  ScenarioField p_x;  // exposure
  ScenarioField p_s;  // surrogate outcome indicator
};

// library.bin: five field blobs back to back, in this order: V, q, the
// membership mask (0/1), P(x), P(S|x). A sibling library.json carries
// epsilon, W, threshold and counts.
void save_library(const std::filesystem::path& bin, const Library& lib, const ScenarioField& p_x,
                  const ScenarioField& p_s);
/// Rebuilds the library from V and epsilon and checks it against the stored
/// q, mask and summary. Throws DataError on any disagreement.
LibraryBundle load_library(const std::filesystem::path& bin);
std::filesystem::path library_json_path(const std::filesystem::path& bin);

Json library_summary(const Library& lib);
Json kernel_json(const ArdSeKernel& k);
Json grid_json(const GridConfig& g);

/// Field blobs of the three posteriors and the blended mean, plus
/// posterior.json with hyperparameters.
void save_posterior(const std::filesystem::path& dir, const GatedPosterior& post);

// CSV `iter,flat,R,Rdot,f`; `iters[i]` is the fit that first used obs[i].
void write_observations_csv(std::ostream& out, const ScenarioSpace& space,
                            const std::vector<Observation>& obs,
                            const std::vector<std::size_t>& iters);

Json report_json(const CompareReport& report);

/// Pretty-printed with a trailing newline. Throws DataError on I/O failure.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace atslg
