#include "evogrid/rng.hpp"

#include <sstream>

#include "evogrid/common.hpp"

namespace evogrid {

std::string Rng::save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::load_state(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
    if (is.fail()) throw IoError("rng: malformed engine state");
}

} // namespace evogrid
