#include "meanfield/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace meanfield {

std::string Rng::state_string() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw std::invalid_argument("malformed rng state string");
}

}  // namespace meanfield
