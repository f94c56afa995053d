#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cotdre/measures.hpp"

namespace cotdre {

// Path CSV: header `t{t}_d{k}` for t in 1..T, k in 1..d, one row per path,
// optional trailing `weight` column. Weights default to uniform.
struct PathCsv {
  std::vector<double> data;  // row-major [n][t][k]
  int num_paths = 0;
  int num_steps = 0;
  int dim = 0;
  std::optional<std::vector<double>> weights;
};

PathCsv parse_path_csv(const std::string& text);
PathCsv read_path_csv(const std::string& filename);

PathBatch to_path_batch(const PathCsv& csv, Bounds bounds);
DiscreteMeasure to_measure(const PathCsv& csv, Bounds bounds);

std::string format_path_csv(const PathBatch& batch,
                            const std::vector<double>* weights);
void write_path_csv(const std::string& filename, const PathBatch& batch,
                    const std::vector<double>* weights);
void write_measure_csv(const std::string& filename, const DiscreteMeasure& m);

}  // namespace cotdre
