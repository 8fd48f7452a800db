#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace stylevar::dataset {

/// The closed set of benchmark styles. Parsing any other label fails.
enum class StyleId {
    realistic_oil,
    impression,
    abstract,
    ink_painting,
    chinese_freehand,
    anime,
    photo,
};

inline constexpr std::array<StyleId, 7> kAllStyles = {
    StyleId::realistic_oil, StyleId::impression,       StyleId::abstract, StyleId::ink_painting,
    StyleId::chinese_freehand, StyleId::anime, StyleId::photo,
};

/// Kebab-case wire label, e.g. "realistic-oil". Stable across all file
/// formats and the HTTP protocol.
std::string_view style_label(StyleId style);

/// Human-readable keyword used in prompts, e.g. "realistic oil painting".
std::string_view style_keyword(StyleId style);

std::optional<StyleId> try_parse_style(std::string_view label);

/// Throws ValidationError on an unknown label.
StyleId parse_style(std::string_view label);

}  // namespace stylevar::dataset
