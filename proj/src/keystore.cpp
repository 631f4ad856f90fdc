#include "spoq/keystore.hpp"

#include <fstream>

namespace spoq::storage {

cbor::Value keystore_record_to_cbor(const KeystoreRecord& record) {
    cbor::Array access;
    for (const auto& k : record.access_keys)
        access.push_back(cbor::Value::bytes(ByteView(k.bytes)));
    cbor::Array enc;
    for (const auto& k : record.encryption_keys)
        enc.push_back(cbor::Value::bytes(ByteView(k)));
    return cbor::MapBuilder{}
        .put("asset", cbor::Value::bytes(record.asset.view()))
        .put("access", cbor::Value::array(std::move(access)))
        .put("enc", cbor::Value::array(std::move(enc)))
        .put_if(record.domain_hint.has_value(), "domain",
                cbor::Value::text(record.domain_hint.value_or("")))
        .put_if(record.fingerprint_secret.has_value(), "fpsec",
                cbor::Value::bytes(ByteView(
                    record.fingerprint_secret.value_or(crypto::Scalar{}).bytes)))
        .build();
}

KeystoreRecord keystore_record_from_cbor(const cbor::Value& v) {
    KeystoreRecord record;
    record.asset = ledger_address_from_bytes(v.at("asset").as_bytes());
    for (const auto& k : v.at("access").as_array())
        record.access_keys.push_back(crypto::AccessKey{to_array<32>(k.as_bytes())});
    for (const auto& k : v.at("enc").as_array())
        record.encryption_keys.push_back(to_array<32>(k.as_bytes()));
    if (const cbor::Value* d = v.find("domain"))
        record.domain_hint = d->as_text();
    if (const cbor::Value* f = v.find("fpsec"))
        record.fingerprint_secret = crypto::Scalar{to_array<32>(f->as_bytes())};
    return record;
}

Keystore::Keystore(std::filesystem::path file) : file_(std::move(file)) {
    if (std::filesystem::exists(file_))
        load();
}

void Keystore::put(const KeystoreRecord& record) {
    std::lock_guard lock(mutex_);
    records_[record.asset] = record;
    persist();
}

KeystoreRecord Keystore::get(const LedgerAddress& asset) const {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(asset);
    if (it == records_.end())
        fail(Errc::NotFound, "no keystore record for " + hex_encode(asset.view()));
    return it->second;
}

std::optional<KeystoreRecord> Keystore::find(const LedgerAddress& asset) const {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(asset);
    if (it == records_.end())
        return std::nullopt;
    return it->second;
}

std::vector<KeystoreRecord> Keystore::list() const {
    std::lock_guard lock(mutex_);
    std::vector<KeystoreRecord> out;
    out.reserve(records_.size());
    for (const auto& [addr, record] : records_)
        out.push_back(record);
    return out;
}

void Keystore::persist() const {
    cbor::MapBuilder records;
    for (const auto& [addr, record] : records_)
        records.put(hex_encode(addr.view()), keystore_record_to_cbor(record));
    const Bytes bytes =
        cbor::encode(cbor::MapBuilder{}.put("records", records.build()).build());
    std::ofstream out(file_, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::IoError, "cannot write " + file_.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void Keystore::load() {
    std::ifstream in(file_, std::ios::binary);
    if (!in)
        fail(Errc::IoError, "cannot read " + file_.string());
    const Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const cbor::Value v = cbor::decode(bytes);
    for (const auto& [key, record] : v.at("records").map_entries())
        records_[ledger_address_from_bytes(hex_decode(key))] =
            keystore_record_from_cbor(record);
}

} // namespace spoq::storage
