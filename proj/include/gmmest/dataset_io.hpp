#pragma once

#include "gmmest/linalg.hpp"

#include <iosfwd>
#include <string>

namespace gmmest {

// Binary dataset file ("GMMC"), samples stored as columns of an N x M matrix
// in memory and one sample after another on disk.
void write_dataset(std::ostream& out, const CMatrix& samples);
CMatrix read_dataset(std::istream& in);
void save_dataset(const std::string& path, const CMatrix& samples);
CMatrix load_dataset(const std::string& path);

// One sample per row: re_0,im_0,re_1,im_1,...
void export_dataset_csv(std::ostream& out, const CMatrix& samples);

}  // namespace gmmest
