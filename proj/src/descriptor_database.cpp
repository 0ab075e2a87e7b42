#include "iftd/descriptor_database.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "iftd/error.hpp"

namespace iftd {

namespace {

constexpr char kMagic[8] = {'I', 'F', 'T', 'D', 'D', 'B', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw FormatError("'" + path.string() + "': truncated database snapshot");
    return v;
}

} // namespace

HashKey hash_key(const TriangleDescriptor& d, double side_resolution)
{
    HashKey k;
    for (int i = 0; i < 3; ++i)
        k.q[i] = static_cast<std::int32_t>(std::floor(d.side_lengths[i] / side_resolution));
    return k;
}

void DatabaseConfig::validate() const
{
    if (!(side_resolution > 0.0))
        throw ConfigError("database: side_resolution must be > 0");
    if (exclusion_window < 0)
        throw ConfigError("database: exclusion_window must be >= 0");
    if (top_k < 1)
        throw ConfigError("database: top_k must be >= 1");
}

DescriptorDatabase::DescriptorDatabase(double side_resolution, bool neighbor_probing)
    : side_resolution_(side_resolution), neighbor_probing_(neighbor_probing)
{
    if (!(side_resolution > 0.0))
        throw ArgumentError("side_resolution must be > 0");
}

void DescriptorDatabase::insert_frame(std::int64_t frame_id,
                                      std::span<const TriangleDescriptor> descriptors)
{
    if (frame_ids_.contains(frame_id))
        throw ArgumentError("frame " + std::to_string(frame_id) + " already in the database");
    for (const auto& d : descriptors)
        if (d.frame_id != frame_id)
            throw ArgumentError("descriptor for frame " + std::to_string(d.frame_id) +
                                " inserted as frame " + std::to_string(frame_id));
    for (const auto& d : descriptors)
        buckets_[hash_key(d, side_resolution_)].push_back(d);
    descriptor_count_ += descriptors.size();
    frame_ids_.insert(frame_id);
}

template <typename Visit>
void DescriptorDatabase::for_each_match(const TriangleDescriptor& query, Visit&& visit) const
{
    const HashKey key = hash_key(query, side_resolution_);
    if (!neighbor_probing_) {
        if (auto it = buckets_.find(key); it != buckets_.end())
            for (const auto& d : it->second)
                visit(d);
        return;
    }
    HashKey probe;
    for (int a = -1; a <= 1; ++a) {
        probe.q[0] = key.q[0] + a;
        for (int b = -1; b <= 1; ++b) {
            probe.q[1] = key.q[1] + b;
            for (int c = -1; c <= 1; ++c) {
                probe.q[2] = key.q[2] + c;
                if (auto it = buckets_.find(probe); it != buckets_.end())
                    for (const auto& d : it->second)
                        visit(d);
            }
        }
    }
}

std::vector<CandidateVote> DescriptorDatabase::query_candidates(
    std::span<const TriangleDescriptor> descriptors, int exclusion_window, int top_k) const
{
    if (top_k < 1)
        throw ArgumentError("top_k must be >= 1");
    std::vector<CandidateVote> result;
    if (descriptors.empty() || buckets_.empty())
        return result;

    const std::int64_t newest_allowed = descriptors.front().frame_id - exclusion_window;
    std::unordered_map<std::int64_t, std::vector<DescriptorMatch>> by_frame;
    for (const auto& q : descriptors) {
        for_each_match(q, [&](const TriangleDescriptor& stored) {
            if (stored.frame_id <= newest_allowed)
                by_frame[stored.frame_id].push_back({&q, &stored});
        });
    }

    result.reserve(by_frame.size());
    for (auto& [frame, pairs] : by_frame)
        result.push_back({frame, pairs.size(), std::move(pairs)});
    std::sort(result.begin(), result.end(), [](const CandidateVote& a, const CandidateVote& b) {
        if (a.votes != b.votes)
            return a.votes > b.votes;
        return a.frame_id > b.frame_id;
    });
    if (result.size() > static_cast<std::size_t>(top_k))
        result.resize(static_cast<std::size_t>(top_k));
    return result;
}

void DescriptorDatabase::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    out.write(kMagic, sizeof(kMagic));
    put(out, kFormatVersion);
    put(out, side_resolution_);
    put(out, static_cast<std::uint8_t>(neighbor_probing_ ? 1 : 0));
    put(out, static_cast<std::uint64_t>(frame_ids_.size()));
    for (auto id : frame_ids_)
        put(out, id);

    std::vector<const HashKey*> keys;
    keys.reserve(buckets_.size());
    for (const auto& [k, v] : buckets_)
        keys.push_back(&k);
    std::sort(keys.begin(), keys.end(), [](const HashKey* a, const HashKey* b) { return *a < *b; });

    put(out, static_cast<std::uint64_t>(keys.size()));
    for (const HashKey* k : keys) {
        const auto& bucket = buckets_.at(*k);
        for (auto c : k->q)
            put(out, c);
        put(out, static_cast<std::uint64_t>(bucket.size()));
        for (const auto& d : bucket) {
            put(out, d.frame_id);
            for (const auto& v : d.vertices()) {
                put(out, v.x);
                put(out, v.y);
                put(out, v.value);
            }
            for (double s : d.side_lengths)
                put(out, s);
        }
    }
    if (!out)
        throw IoError("write failed on '" + path.string() + "'");
}

DescriptorDatabase DescriptorDatabase::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("'" + path.string() + "' is not a descriptor database snapshot");
    auto version = get<std::uint32_t>(in, path);
    if (version != kFormatVersion)
        throw FormatError("'" + path.string() + "': unsupported snapshot version " +
                          std::to_string(version));
    auto resolution = get<double>(in, path);
    auto probing = get<std::uint8_t>(in, path);
    if (!(resolution > 0.0))
        throw FormatError("'" + path.string() + "': invalid side resolution");
    DescriptorDatabase db(resolution, probing != 0);

    auto frames = get<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < frames; ++i)
        db.frame_ids_.insert(get<std::int64_t>(in, path));

    auto bucket_count = get<std::uint64_t>(in, path);
    for (std::uint64_t b = 0; b < bucket_count; ++b) {
        HashKey key;
        for (auto& c : key.q)
            c = get<std::int32_t>(in, path);
        auto n = get<std::uint64_t>(in, path);
        auto& bucket = db.buckets_[key];
        for (std::uint64_t i = 0; i < n; ++i) {
            TriangleDescriptor d;
            d.frame_id = get<std::int64_t>(in, path);
            for (Vertex* v : {&d.vertex_a, &d.vertex_b, &d.vertex_c}) {
                v->x = get<double>(in, path);
                v->y = get<double>(in, path);
                v->value = get<double>(in, path);
            }
            for (double& s : d.side_lengths)
                s = get<double>(in, path);
            if (hash_key(d, resolution) != key || !db.frame_ids_.contains(d.frame_id))
                throw FormatError("'" + path.string() + "': inconsistent bucket record");
            bucket.push_back(d);
        }
        db.descriptor_count_ += n;
    }
    return db;
}

} // namespace iftd
