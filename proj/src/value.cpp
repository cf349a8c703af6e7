#include "npcsh/value.hpp"

#include <cmath>

#include "npcsh/error.hpp"

namespace npcsh {

TypeTag type_tag_from_string(const std::string& tag) {
    if (tag == "string") return TypeTag::String;
    if (tag == "integer" || tag == "int") return TypeTag::Integer;
    if (tag == "number" || tag == "float") return TypeTag::Number;
    if (tag == "boolean" || tag == "bool") return TypeTag::Boolean;
    if (tag == "list") return TypeTag::List;
    throw Error(ErrorKind::BadTypeTag, "unknown type tag '" + tag + "'");
}

const char* to_string(TypeTag tag) {
    switch (tag) {
        case TypeTag::String: return "string";
        case TypeTag::Integer: return "integer";
        case TypeTag::Number: return "number";
        case TypeTag::Boolean: return "boolean";
        case TypeTag::List: return "list";
    }
    return "string";
}

bool value_matches(TypeTag tag, const Value& value) {
    switch (tag) {
        case TypeTag::String: return value.is_string();
        case TypeTag::Integer: return value.is_number_integer();
        case TypeTag::Number: return value.is_number();
        case TypeTag::Boolean: return value.is_boolean();
        case TypeTag::List: return value.is_array();
    }
    return false;
}

namespace {

// Parses the entire string as the requested numeric type; rejects partial
// matches like "5x" or surrounding junk.
std::optional<Value> parse_string_literal(TypeTag tag, const std::string& text) {
    try {
        switch (tag) {
            case TypeTag::Integer: {
                size_t pos = 0;
                long long v = std::stoll(text, &pos);
                if (pos != text.size()) return std::nullopt;
                return Value(v);
            }
            case TypeTag::Number: {
                size_t pos = 0;
                double v = std::stod(text, &pos);
                if (pos != text.size() || std::isnan(v)) return std::nullopt;
                return Value(v);
            }
            case TypeTag::Boolean: {
                if (text == "true") return Value(true);
                if (text == "false") return Value(false);
                return std::nullopt;
            }
            default:
                return std::nullopt;
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

std::optional<Value> coerce_value(TypeTag tag, const Value& value) {
    if (value_matches(tag, value)) return std::optional<Value>(std::in_place, value);
    if (value.is_string()) return parse_string_literal(tag, value.get<std::string>());
    return std::nullopt;
}

std::string value_to_text(const Value& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

} // namespace npcsh
