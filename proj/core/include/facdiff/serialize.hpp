#pragma once

// JSON containers for codebooks and problem instances. Raw entries are stored
// as +-1 integers and doubles with round-trip precision, so a stored instance
// replays bit-exactly.

#include <string>

#include "facdiff/vsa.hpp"

namespace facdiff {

std::string codebook_to_json(const Codebook& codebook);
Codebook codebook_from_json(const std::string& text);

std::string instance_to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const std::string& text);

}  // namespace facdiff
