#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spoq/bytes.hpp"
#include "spoq/errors.hpp"

namespace spoq::cbor {

// Deterministic CBOR (RFC 8949 core deterministic encoding profile):
// definite lengths only, shortest-form integer heads, map keys sorted by
// the byte order of their encodings. Only the subset of major types the
// platform's entry formats need is supported: unsigned integers, byte
// strings, text strings, arrays, text-keyed maps, booleans, and null.
//
// The decoder is strict: it rejects indefinite lengths, non-minimal heads,
// duplicate or misordered map keys, and trailing garbage, so decode(bytes)
// succeeding implies encode(decode(bytes)) == bytes.

class Value;
using Array = std::vector<Value>;
using MapEntry = std::pair<std::string, Value>;

class Value {
public:
    enum class Type { Unsigned, Bytes, Text, Array, Map, Bool, Null };

    Value() : type_(Type::Null) {}

    static Value uns(std::uint64_t v);
    static Value bytes(spoq::Bytes v);
    static Value bytes(ByteView v) { return bytes(to_bytes(v)); }
    static Value text(std::string v);
    static Value array(spoq::cbor::Array v);
    static Value map(std::vector<MapEntry> entries);
    static Value boolean(bool v);
    static Value null() { return Value(); }

    Type type() const { return type_; }
    bool is_null() const { return type_ == Type::Null; }

    std::uint64_t as_unsigned() const;
    const spoq::Bytes& as_bytes() const;
    const std::string& as_text() const;
    const spoq::cbor::Array& as_array() const;
    bool as_bool() const;

    // Map access. at() throws DecodeError when the field is missing;
    // find() returns nullptr instead.
    const Value& at(std::string_view key) const;
    const Value* find(std::string_view key) const;
    std::size_t map_size() const;
    const std::vector<MapEntry>& map_entries() const;

    bool operator==(const Value& other) const;

private:
    Type type_;
    std::uint64_t uns_ = 0;
    bool bool_ = false;
    spoq::Bytes bytes_;
    std::string text_;
    spoq::cbor::Array array_;
    std::vector<MapEntry> map_; // kept sorted by encoded-key order
};

spoq::Bytes encode(const Value& value);
void encode_to(const Value& value, spoq::Bytes& out);

// Decodes exactly one item covering the whole input.
Value decode(ByteView input);

// Decodes one item from the front of `input`, advancing `offset`; used for
// reading streams of concatenated items (the chain file).
Value decode_prefix(ByteView input, std::size_t& offset);

// Convenience builder for map construction sites.
class MapBuilder {
public:
    MapBuilder& put(std::string key, Value v) {
        entries_.emplace_back(std::move(key), std::move(v));
        return *this;
    }
    MapBuilder& put_if(bool cond, std::string key, Value v) {
        if (cond)
            entries_.emplace_back(std::move(key), std::move(v));
        return *this;
    }
    Value build() { return Value::map(std::move(entries_)); }

private:
    std::vector<MapEntry> entries_;
};

} // namespace spoq::cbor
