#pragma once

#include <string>
#include <vector>

#include "ppl/analysis.hpp"
#include "ppl/cfg.hpp"
#include "ppl/slicer.hpp"

namespace ppl {

// One benchmark-corpus entry: where the source lives, which addresses are
// clamped to data, how data is generated, and which algorithms apply.
struct ModelManifest {
  std::string name;
  std::string file;
  bool single_occurrence = true;
  bool bbvi_compatible = false;
  bool smc_compatible = false;
  std::string size_var;      // truncation parameter ("" when fixed-size)
  int default_size = 0;
  std::string obs_prefix;    // observed (clamped) address prefix, "" = none
  void (*gen)(uint64_t seed, int size, Trace& out) = nullptr;
};

// Program state captured immediately before a sample occurrence, together
// with the CFG node that occurrence came from.
struct Checkpoint {
  ProgramState state;
  int node = -1;
};

const std::vector<ModelManifest>& corpus();
const ModelManifest* find_model(const std::string& name);

// Default models directory: --models-dir flag, else PPL_MODELS_DIR env,
// else the compiled-in source location.
std::string models_dir_default();

struct Model {
  ModelManifest mf;
  Program prog;
  Cfg cfg;
  Analysis an;
  std::vector<SlicedProgram> factor_slices;  // per factor index
  std::vector<SlicedProgram> smc_slices;     // per factor index
  SlicedProgram smc_entry;
  Trace observed;
  int data_size = 0;
  uint64_t data_seed = 0;

  bool is_observed(const std::string& addr) const {
    return !mf.obs_prefix.empty() && addr.rfind(mf.obs_prefix, 0) == 0;
  }
  int slice_index_of_node(int node_id) const { return an.index_of_node(node_id); }
};

Model load_model(const ModelManifest& mf, const std::string& models_dir, uint64_t data_seed,
                 int size_override = 0);

// Loads an ad-hoc model from source text (used by tests).
Model load_model_source(const ModelManifest& mf, const std::string& source, uint64_t data_seed,
                        int size_override = 0);

// The program with the manifest's size variable rewritten to t (SMC's p_t).
Program truncate_program(const Model& m, int t);

}  // namespace ppl
