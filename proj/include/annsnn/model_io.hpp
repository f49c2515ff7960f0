#pragma once

#include <iosfwd>
#include <string>

#include "annsnn/ann.hpp"
#include "annsnn/snn.hpp"

namespace annsnn {

// Text model files: a header of `key value...` lines ending in `end`, then
// named parameter blocks (`W.3`, `b.3`, `theta.3`, `Vth.3`, `vinit.3`), each a
// shape line followed by the values at 17 significant digits.

void save_ann(std::ostream& out, const AnnNetwork& net);
AnnNetwork load_ann(std::istream& in);

void save_snn(std::ostream& out, const SnnNetwork& net);
SnnNetwork load_snn(std::istream& in);

void save_ann_file(const std::string& path, const AnnNetwork& net);
AnnNetwork load_ann_file(const std::string& path);
void save_snn_file(const std::string& path, const SnnNetwork& net);
SnnNetwork load_snn_file(const std::string& path);

/// "ann" or "snn", read from the header without loading the body.
std::string model_kind_of_file(const std::string& path);

}  // namespace annsnn
