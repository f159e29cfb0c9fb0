#include "portal/ids.hpp"

#include <boost/uuid/uuid_io.hpp>

namespace portal {

std::string RandomIdSource::next() {
    std::lock_guard lock(mutex_);
    return boost::uuids::to_string(gen_());
}

std::string SeededIdSource::next() {
    std::lock_guard lock(mutex_);
    return boost::uuids::to_string(gen_());
}

}  // namespace portal
