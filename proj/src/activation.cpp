#include "actnet/activation.hpp"

namespace actnet {

std::string_view family_name(ActivationFamily family) {
    switch (family) {
    case ActivationFamily::SinH: return "sinh";
    case ActivationFamily::Exp: return "exp";
    case ActivationFamily::Weibull: return "weibull";
    }
    return "unknown";
}

ActivationFamily parse_family(std::string_view name) {
    if (name == "sinh") return ActivationFamily::SinH;
    if (name == "exp") return ActivationFamily::Exp;
    if (name == "weibull") return ActivationFamily::Weibull;
    throw ParameterError("unknown activation family '" + std::string(name) + "'");
}

} // namespace actnet
