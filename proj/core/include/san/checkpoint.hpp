#pragma once

#include <map>
#include <string>

#include "san/params.hpp"

namespace san {

// Checkpoints are a pair of files: <prefix>.json, a manifest mapping each
// tensor name to shape/dtype/byte-offset plus free-form metadata, and
// <prefix>.bin, the concatenated little-endian float64 payload. Round trips
// are bit-exact.

// `meta` is serialized JSON text for the manifest's "meta" field (may be
// empty, then "{}" is written).
void save_checkpoint(const std::string& prefix, const ParamSet& params,
                     const std::string& meta_json);

struct LoadedCheckpoint {
    ParamSet params;
    std::string meta_json;
};

LoadedCheckpoint load_checkpoint(const std::string& prefix, Graph& g);

// A tensor-map file in the same manifest+blob format, used for auxiliary
// inputs (precomputed context vectors keyed by example id).
void save_tensor_map(const std::string& prefix,
                     const std::map<std::string, std::pair<Shape,
                                    std::vector<double>>>& tensors);
std::map<std::string, std::pair<Shape, std::vector<double>>> load_tensor_map(
    const std::string& prefix);

}  // namespace san
