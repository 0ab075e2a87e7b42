#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "iftd/triangle_descriptor.hpp"

namespace iftd {

// Side lengths quantized to side_resolution; components are non-decreasing.
struct HashKey
{
    std::array<std::int32_t, 3> q{};

    friend bool operator==(const HashKey&, const HashKey&) = default;
    friend auto operator<=>(const HashKey&, const HashKey&) = default;
};

struct HashKeyHasher
{
    std::size_t operator()(const HashKey& k) const noexcept
    {
        std::uint64_t h = 1469598103934665603ull;
        for (auto v : k.q) {
            h ^= static_cast<std::uint32_t>(v);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

HashKey hash_key(const TriangleDescriptor& d, double side_resolution);

// A query descriptor paired with a stored one that hashed to the same (or an
// adjacent) container. Both pointers refer into the caller's query span and
// the database; they stay valid until either is modified.
struct DescriptorMatch
{
    const TriangleDescriptor* query = nullptr;
    const TriangleDescriptor* stored = nullptr;
};

struct CandidateVote
{
    std::int64_t frame_id = 0;
    std::size_t votes = 0;
    std::vector<DescriptorMatch> matched_pairs;
};

struct DatabaseConfig
{
    double side_resolution = 0.2;
    bool neighbor_probing = true;
    int exclusion_window = 30;
    int top_k = 50;

    void validate() const;
};

// Hash voxel containers keyed by quantized side lengths.
//
// Single writer, many readers: query_candidates() is const and may run
// concurrently with other queries, never with insert_frame().
class DescriptorDatabase
{
public:
    explicit DescriptorDatabase(double side_resolution = 0.2, bool neighbor_probing = true);

    // Throws ArgumentError if frame_id was already inserted or a descriptor
    // carries a different frame id.
    void insert_frame(std::int64_t frame_id, std::span<const TriangleDescriptor> descriptors);

    // Votes per stored frame with frame_id <= query_frame - exclusion_window,
    // sorted by votes (descending, ties to the more recent frame), truncated
    // to top_k. The query frame is taken from the descriptors themselves.
    std::vector<CandidateVote> query_candidates(std::span<const TriangleDescriptor> descriptors,
                                                int exclusion_window, int top_k) const;

    std::size_t frames_indexed() const { return frame_ids_.size(); }
    std::size_t descriptor_count() const { return descriptor_count_; }
    std::size_t bucket_count() const { return buckets_.size(); }
    double side_resolution() const { return side_resolution_; }
    bool neighbor_probing() const { return neighbor_probing_; }
    const std::set<std::int64_t>& frame_ids() const { return frame_ids_; }
    const std::unordered_map<HashKey, std::vector<TriangleDescriptor>, HashKeyHasher>& buckets() const
    {
        return buckets_;
    }

    // Binary snapshot: magic "IFTDDB", u32 version, header fields, then one
    // record per bucket. Little-endian. See docs/database_format.md.
    void save(const std::filesystem::path& path) const;
    static DescriptorDatabase load(const std::filesystem::path& path);

private:
    template <typename Visit>
    void for_each_match(const TriangleDescriptor& query, Visit&& visit) const;

    double side_resolution_;
    bool neighbor_probing_;
    std::unordered_map<HashKey, std::vector<TriangleDescriptor>, HashKeyHasher> buckets_;
    std::set<std::int64_t> frame_ids_;
    std::size_t descriptor_count_ = 0;
};

} // namespace iftd
