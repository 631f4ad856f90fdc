#include "spoq/cbor.hpp"

#include <algorithm>

namespace spoq::cbor {

namespace {

constexpr std::uint8_t kMajorUnsigned = 0;
constexpr std::uint8_t kMajorBytes = 2;
constexpr std::uint8_t kMajorText = 3;
constexpr std::uint8_t kMajorArray = 4;
constexpr std::uint8_t kMajorMap = 5;
constexpr std::uint8_t kMajorSimple = 7;

constexpr std::uint8_t kSimpleFalse = 20;
constexpr std::uint8_t kSimpleTrue = 21;
constexpr std::uint8_t kSimpleNull = 22;

void encode_head(std::uint8_t major, std::uint64_t value, Bytes& out) {
    const std::uint8_t m = static_cast<std::uint8_t>(major << 5);
    if (value < 24) {
        out.push_back(static_cast<std::uint8_t>(m | value));
    } else if (value <= 0xff) {
        out.push_back(m | 24);
        out.push_back(static_cast<std::uint8_t>(value));
    } else if (value <= 0xffff) {
        out.push_back(m | 25);
        out.push_back(static_cast<std::uint8_t>(value >> 8));
        out.push_back(static_cast<std::uint8_t>(value));
    } else if (value <= 0xffffffffu) {
        out.push_back(m | 26);
        for (int shift = 24; shift >= 0; shift -= 8)
            out.push_back(static_cast<std::uint8_t>(value >> shift));
    } else {
        out.push_back(m | 27);
        for (int shift = 56; shift >= 0; shift -= 8)
            out.push_back(static_cast<std::uint8_t>(value >> shift));
    }
}

Bytes encode_text_key(const std::string& key) {
    Bytes out;
    encode_head(kMajorText, key.size(), out);
    append(out, ByteView(reinterpret_cast<const std::uint8_t*>(key.data()), key.size()));
    return out;
}

struct Reader {
    ByteView input;
    std::size_t pos = 0;

    std::uint8_t byte() {
        if (pos >= input.size())
            fail(Errc::DecodeError, "cbor: truncated input");
        return input[pos++];
    }

    ByteView take(std::size_t n) {
        if (input.size() - pos < n)
            fail(Errc::DecodeError, "cbor: truncated input");
        ByteView v = input.subspan(pos, n);
        pos += n;
        return v;
    }

    // Reads a head, enforcing shortest-form encoding.
    std::pair<std::uint8_t, std::uint64_t> head() {
        const std::uint8_t b = byte();
        const std::uint8_t major = b >> 5;
        const std::uint8_t info = b & 0x1f;
        if (info < 24)
            return {major, info};
        if (info == 31)
            fail(Errc::DecodeError, "cbor: indefinite length not allowed");
        if (info > 27)
            fail(Errc::DecodeError, "cbor: reserved additional info");
        const std::size_t n = std::size_t{1} << (info - 24);
        std::uint64_t value = 0;
        for (auto c : take(n))
            value = (value << 8) | c;
        const std::uint64_t min = n == 1 ? 24 : (std::uint64_t{1} << (4 * n));
        if (value < min)
            fail(Errc::DecodeError, "cbor: non-minimal length encoding");
        return {major, value};
    }

    Value item(int depth) {
        if (depth > 64)
            fail(Errc::DecodeError, "cbor: nesting too deep");
        auto [major, arg] = head();
        switch (major) {
        case kMajorUnsigned:
            return Value::uns(arg);
        case kMajorBytes:
            return Value::bytes(take(arg));
        case kMajorText: {
            ByteView v = take(arg);
            return Value::text(std::string(v.begin(), v.end()));
        }
        case kMajorArray: {
            Array items;
            items.reserve(std::min<std::uint64_t>(arg, 4096));
            for (std::uint64_t i = 0; i < arg; ++i)
                items.push_back(item(depth + 1));
            return Value::array(std::move(items));
        }
        case kMajorMap: {
            std::vector<MapEntry> entries;
            Bytes prev_key;
            for (std::uint64_t i = 0; i < arg; ++i) {
                Value key = item(depth + 1);
                if (key.type() != Value::Type::Text)
                    fail(Errc::DecodeError, "cbor: non-text map key");
                Bytes enc = encode_text_key(key.as_text());
                if (i > 0 && byte_compare(prev_key, enc) >= 0)
                    fail(Errc::DecodeError, "cbor: map keys not in canonical order");
                prev_key = std::move(enc);
                entries.emplace_back(key.as_text(), item(depth + 1));
            }
            return Value::map(std::move(entries));
        }
        case kMajorSimple:
            if (arg == kSimpleFalse)
                return Value::boolean(false);
            if (arg == kSimpleTrue)
                return Value::boolean(true);
            if (arg == kSimpleNull)
                return Value::null();
            fail(Errc::DecodeError, "cbor: unsupported simple value");
        default:
            fail(Errc::DecodeError, "cbor: unsupported major type");
        }
    }
};

} // namespace

Value Value::uns(std::uint64_t v) {
    Value out;
    out.type_ = Type::Unsigned;
    out.uns_ = v;
    return out;
}

Value Value::bytes(spoq::Bytes v) {
    Value out;
    out.type_ = Type::Bytes;
    out.bytes_ = std::move(v);
    return out;
}

Value Value::text(std::string v) {
    Value out;
    out.type_ = Type::Text;
    out.text_ = std::move(v);
    return out;
}

Value Value::array(spoq::cbor::Array v) {
    Value out;
    out.type_ = Type::Array;
    out.array_ = std::move(v);
    return out;
}

Value Value::map(std::vector<MapEntry> entries) {
    Value out;
    out.type_ = Type::Map;
    std::sort(entries.begin(), entries.end(), [](const MapEntry& a, const MapEntry& b) {
        return byte_compare(encode_text_key(a.first), encode_text_key(b.first)) < 0;
    });
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i - 1].first == entries[i].first)
            fail(Errc::DecodeError, "cbor: duplicate map key '" + entries[i].first + "'");
    out.map_ = std::move(entries);
    return out;
}

Value Value::boolean(bool v) {
    Value out;
    out.type_ = Type::Bool;
    out.bool_ = v;
    return out;
}

std::uint64_t Value::as_unsigned() const {
    if (type_ != Type::Unsigned)
        fail(Errc::DecodeError, "cbor: expected unsigned");
    return uns_;
}

const spoq::Bytes& Value::as_bytes() const {
    if (type_ != Type::Bytes)
        fail(Errc::DecodeError, "cbor: expected byte string");
    return bytes_;
}

const std::string& Value::as_text() const {
    if (type_ != Type::Text)
        fail(Errc::DecodeError, "cbor: expected text string");
    return text_;
}

const Array& Value::as_array() const {
    if (type_ != Type::Array)
        fail(Errc::DecodeError, "cbor: expected array");
    return array_;
}

bool Value::as_bool() const {
    if (type_ != Type::Bool)
        fail(Errc::DecodeError, "cbor: expected boolean");
    return bool_;
}

const Value& Value::at(std::string_view key) const {
    const Value* v = find(key);
    if (!v)
        fail(Errc::DecodeError, "cbor: missing field '" + std::string(key) + "'");
    return *v;
}

const Value* Value::find(std::string_view key) const {
    if (type_ != Type::Map)
        fail(Errc::DecodeError, "cbor: expected map");
    for (const auto& [k, v] : map_)
        if (k == key)
            return &v;
    return nullptr;
}

std::size_t Value::map_size() const {
    if (type_ != Type::Map)
        fail(Errc::DecodeError, "cbor: expected map");
    return map_.size();
}

const std::vector<MapEntry>& Value::map_entries() const {
    if (type_ != Type::Map)
        fail(Errc::DecodeError, "cbor: expected map");
    return map_;
}

bool Value::operator==(const Value& other) const {
    if (type_ != other.type_)
        return false;
    switch (type_) {
    case Type::Unsigned: return uns_ == other.uns_;
    case Type::Bytes: return bytes_ == other.bytes_;
    case Type::Text: return text_ == other.text_;
    case Type::Array: return array_ == other.array_;
    case Type::Map: return map_ == other.map_;
    case Type::Bool: return bool_ == other.bool_;
    case Type::Null: return true;
    }
    return false;
}

void encode_to(const Value& value, Bytes& out) {
    switch (value.type()) {
    case Value::Type::Unsigned:
        encode_head(kMajorUnsigned, value.as_unsigned(), out);
        break;
    case Value::Type::Bytes:
        encode_head(kMajorBytes, value.as_bytes().size(), out);
        append(out, value.as_bytes());
        break;
    case Value::Type::Text: {
        const std::string& s = value.as_text();
        encode_head(kMajorText, s.size(), out);
        append(out, ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
        break;
    }
    case Value::Type::Array:
        encode_head(kMajorArray, value.as_array().size(), out);
        for (const Value& v : value.as_array())
            encode_to(v, out);
        break;
    case Value::Type::Map:
        encode_head(kMajorMap, value.map_size(), out);
        for (const auto& [k, v] : value.map_entries()) {
            encode_head(kMajorText, k.size(), out);
            append(out, ByteView(reinterpret_cast<const std::uint8_t*>(k.data()), k.size()));
            encode_to(v, out);
        }
        break;
    case Value::Type::Bool:
        out.push_back(static_cast<std::uint8_t>(0xe0 | (value.as_bool() ? kSimpleTrue : kSimpleFalse)));
        break;
    case Value::Type::Null:
        out.push_back(0xe0 | kSimpleNull);
        break;
    }
}

Bytes encode(const Value& value) {
    Bytes out;
    encode_to(value, out);
    return out;
}

Value decode(ByteView input) {
    Reader r{input};
    Value v = r.item(0);
    if (r.pos != input.size())
        fail(Errc::DecodeError, "cbor: trailing bytes after item");
    return v;
}

Value decode_prefix(ByteView input, std::size_t& offset) {
    Reader r{input.subspan(offset)};
    Value v = r.item(0);
    offset += r.pos;
    return v;
}

} // namespace spoq::cbor
