#include "ambient/network_case.hpp"

#include "ambient/errors.hpp"

namespace ambient {

const DynamicLoadParams& NetworkCase::load_at(int bus) const {
    for (const auto& load : dynamic_loads) {
        if (load.bus == bus) return load;
    }
    throw ConfigError("bus " + std::to_string(bus) + " has no dynamic load");
}

const char* to_string(BusKind kind) {
    switch (kind) {
        case BusKind::slack: return "slack";
        case BusKind::generator: return "generator";
        case BusKind::load_dynamic: return "load-dynamic";
        case BusKind::load_static: return "load-static";
    }
    return "?";
}

BusKind bus_kind_from_string(const std::string& s) {
    if (s == "slack") return BusKind::slack;
    if (s == "generator") return BusKind::generator;
    if (s == "load-dynamic") return BusKind::load_dynamic;
    if (s == "load-static") return BusKind::load_static;
    throw ConfigError("unknown bus kind '" + s + "'");
}

}  // namespace ambient
