// SPDX-License-Identifier: Apache-2.0
#include "kane/random.hpp"

#include <sstream>

#include "kane/error.hpp"

namespace kane {

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream in(s);
  in >> engine_;
  if (in.fail()) throw IoError("malformed RNG state");
}

}  // namespace kane
