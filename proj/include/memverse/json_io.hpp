#pragma once

// nlohmann::json conversions for the record types that cross file and wire
// boundaries. Object keys serialize in sorted order, which is what makes the
// on-disk formats canonical.

#include <json.hpp>

#include "memverse/chunk_store.hpp"

namespace memverse {

using Json = nlohmann::json;

void to_json(Json& j, const MediaRef& m);
void from_json(const Json& j, MediaRef& m);

void to_json(Json& j, const Chunk& c);
void from_json(const Json& j, Chunk& c);

}  // namespace memverse
