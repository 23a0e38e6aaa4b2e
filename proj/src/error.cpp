#include "kgqa/error.hpp"

namespace kgqa {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::parse: return "parse";
        case ErrorCode::cycle: return "cycle";
        case ErrorCode::not_found: return "not-found";
        case ErrorCode::link_failure: return "link-failure";
        case ErrorCode::format: return "format";
        case ErrorCode::unsupported_query: return "unsupported-query";
        case ErrorCode::annotation_service: return "annotation-service";
        case ErrorCode::validation: return "validation";
        case ErrorCode::training: return "training";
        case ErrorCode::model_state: return "model-state";
        case ErrorCode::frozen: return "frozen";
    }
    return "unknown";
}

} // namespace kgqa
