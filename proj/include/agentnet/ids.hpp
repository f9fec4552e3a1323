#pragma once

#include <string>
#include <string_view>

namespace agentnet {

/// Random RFC 4122 version-4 UUID, lowercase hex.
std::string make_uuid_v4();

bool is_uuid_v4(std::string_view s);

/// Renames every UUIDv4 in `text` to "id-1", "id-2", ... in first-seen
/// order, so documents containing random ids can be compared byte-wise.
std::string normalize_uuids(std::string_view text);

} // namespace agentnet
