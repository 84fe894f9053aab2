#pragma once

#include <string>

#include "pauselab/model.hpp"
#include "pauselab/vocab.hpp"

namespace pauselab {

/// Binary checkpoint: magic + format version + key-value header (model
/// config, vocab, extra provenance JSON) followed by named tensors with
/// shapes and row-major little-endian values. Round-trips bit-exactly.
template <class Real>
void save_checkpoint(const std::string& path, const Model<Real>& model, const Vocab& vocab,
                     const std::string& provenance_json = "{}");

template <class Real>
struct Checkpoint {
    Model<Real> model;
    Vocab vocab;
    std::string provenance_json;
};

template <class Real>
Checkpoint<Real> load_checkpoint(const std::string& path);

/// Precision tag stored in a checkpoint header without loading tensors.
Precision checkpoint_precision(const std::string& path);

}  // namespace pauselab
