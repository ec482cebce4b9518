#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace cgat {

// Dense index in its own namespace; users, items, entities and relations
// cannot be mixed up at compile time.
template <typename Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}
  constexpr explicit Id(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}
  constexpr Id(int) = delete;

  constexpr std::size_t index() const { return value; }

  friend constexpr auto operator<=>(Id, Id) = default;
};

using UserId = Id<struct UserTag>;
using ItemId = Id<struct ItemTag>;
using EntityId = Id<struct EntityTag>;
using RelationId = Id<struct RelationTag>;

}  // namespace cgat

template <typename Tag>
struct std::hash<cgat::Id<Tag>> {
  std::size_t operator()(cgat::Id<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
