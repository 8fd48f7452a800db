#include "stylevar/styles.hpp"

#include <string>

#include "stylevar/errors.hpp"

namespace stylevar::dataset {

std::string_view style_label(StyleId style) {
    switch (style) {
        case StyleId::realistic_oil: return "realistic-oil";
        case StyleId::impression: return "impression";
        case StyleId::abstract: return "abstract";
        case StyleId::ink_painting: return "ink-painting";
        case StyleId::chinese_freehand: return "chinese-freehand";
        case StyleId::anime: return "anime";
        case StyleId::photo: return "photo";
    }
    throw ValidationError("invalid StyleId value");
}

std::string_view style_keyword(StyleId style) {
    switch (style) {
        case StyleId::realistic_oil: return "realistic oil painting";
        case StyleId::impression: return "impressionist oil painting";
        case StyleId::abstract: return "abstract painting";
        case StyleId::ink_painting: return "Chinese ink painting";
        case StyleId::chinese_freehand: return "Chinese freehand painting";
        case StyleId::anime: return "anime";
        case StyleId::photo: return "real photograph";
    }
    throw ValidationError("invalid StyleId value");
}

std::optional<StyleId> try_parse_style(std::string_view label) {
    for (StyleId style : kAllStyles) {
        if (style_label(style) == label) {
            return style;
        }
    }
    return std::nullopt;
}

StyleId parse_style(std::string_view label) {
    if (auto style = try_parse_style(label)) {
        return *style;
    }
    throw ValidationError("unknown style label: \"" + std::string(label) + "\"");
}

}  // namespace stylevar::dataset
