// Copyright 2026 The ARL Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "arl/matrix.hpp"

#include "arl/error.hpp"

namespace arl {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("matrix: " + std::to_string(data.size()) + " values for shape (" +
                     std::to_string(r) + " x " + std::to_string(c) + ")");
  }
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows) + " x " + std::to_string(cols) + ")";
}

}  // namespace arl
