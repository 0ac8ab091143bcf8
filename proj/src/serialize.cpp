#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sann/index.hpp"

namespace sann {

namespace {

// All integers and IEEE-754 doubles little-endian.
struct Writer {
  std::vector<std::uint8_t> out;

  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void vec_u32(const std::vector<std::uint32_t>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (auto x : v) u32(x);
  }
  void vec_f64(const std::vector<double>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (auto x : v) f64(x);
  }
};

struct Reader {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > in.size()) throw std::runtime_error("forest file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return in[pos++];
  }
  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(in[pos + i]) << (8 * i);
    pos += sizeof(T);
    return v;
  }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le<std::uint64_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::vector<std::uint32_t> vec_u32() {
    const std::uint32_t n = u32();
    std::vector<std::uint32_t> v(n);
    for (auto& x : v) x = u32();
    return v;
  }
  std::vector<double> vec_f64() {
    const std::uint32_t n = u32();
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
};

enum NodeTag : std::uint8_t {
  kLeafStore = 1,
  kLeafBruteForce = 2,
  kLeafBaseLSH = 3,
  kSphericalSplit = 4,
  kGridSplit = 5,
  kClusterSplit = 6,
  kAnnulusSplit = 7,
};

void write_node(Writer& w, const IndexNode& node);

void write_grid_key(Writer& w, const GridKey& key) {
  w.u32(static_cast<std::uint32_t>(key.size()));
  for (auto x : key) w.i64(x);
}

GridKey read_grid_key(Reader& r) {
  const std::uint32_t n = r.u32();
  GridKey key(n);
  for (auto& x : key) x = r.i64();
  return key;
}

void write_node(Writer& w, const IndexNode& node) {
  std::visit(
      [&](const auto& alt) {
        using T = std::decay_t<decltype(alt)>;
        if constexpr (std::is_same_v<T, LeafStore>) {
          w.u8(kLeafStore);
          w.u32(alt.point_id);
          w.vec_u32(alt.members);
        } else if constexpr (std::is_same_v<T, LeafBruteForce>) {
          w.u8(kLeafBruteForce);
          w.vec_u32(alt.ids);
        } else if constexpr (std::is_same_v<T, LeafBaseLSH>) {
          w.u8(kLeafBaseLSH);
          w.u8(alt.spherical ? 1 : 0);
          w.u32(alt.dim);
          w.f64(alt.r1);
          w.f64(alt.r2);
          if (alt.spherical) {
            w.vec_f64(alt.frame.center);
            w.f64(alt.frame.radius);
            w.u32(alt.T);
            w.f64(alt.threshold);
          } else {
            w.u32(alt.k);
            w.f64(alt.width);
          }
          w.u32(static_cast<std::uint32_t>(alt.tables.size()));
          for (const BaseLshTable& t : alt.tables) {
            w.u64(t.seed);
            if (alt.spherical) {
              w.u32(static_cast<std::uint32_t>(t.sph_buckets.size()));
              for (const auto& [key, ids] : t.sph_buckets) {
                w.u64(key);
                w.vec_u32(ids);
              }
            } else {
              w.u32(static_cast<std::uint32_t>(t.grid_buckets.size()));
              for (const auto& [key, ids] : t.grid_buckets) {
                write_grid_key(w, key);
                w.vec_u32(ids);
              }
            }
          }
        } else if constexpr (std::is_same_v<T, SphericalSplit>) {
          w.u8(kSphericalSplit);
          w.vec_f64(alt.frame.center);
          w.f64(alt.frame.radius);
          w.u64(alt.partition.seed);
          w.u32(alt.partition.dim);
          w.u32(alt.partition.T);
          w.f64(alt.partition.threshold);
          w.u32(static_cast<std::uint32_t>(alt.children.size()));
          for (const auto& [part, child] : alt.children) {
            w.u32(part);
            write_node(w, *child);
          }
        } else if constexpr (std::is_same_v<T, GridSplit>) {
          w.u8(kGridSplit);
          w.u64(alt.partition.seed);
          w.u32(alt.partition.dim);
          w.u32(static_cast<std::uint32_t>(alt.children.size()));
          for (const auto& [key, child] : alt.children) {
            write_grid_key(w, key);
            write_node(w, *child);
          }
        } else if constexpr (std::is_same_v<T, ClusterSplit>) {
          w.u8(kClusterSplit);
          w.u32(static_cast<std::uint32_t>(alt.clusters.size()));
          for (const ClusterChild& cc : alt.clusters) {
            w.u32(cc.cluster.center_id);
            w.f64(cc.cluster.radius);
            w.vec_u32(cc.cluster.members);
            write_node(w, *cc.child);
          }
          w.u8(alt.remainder ? 1 : 0);
          if (alt.remainder) write_node(w, *alt.remainder);
        } else {
          static_assert(std::is_same_v<T, AnnulusSplit>);
          w.u8(kAnnulusSplit);
          w.vec_f64(alt.center);
          w.f64(alt.R);
          w.f64(alt.delta);
          w.f64(alt.r1);
          w.f64(alt.r2);
          w.u32(static_cast<std::uint32_t>(alt.entries.size()));
          for (const AnnulusEntry& e : alt.entries) {
            w.u32(e.i);
            w.u32(e.j);
            w.f64(e.r1p);
            w.f64(e.r2p);
            w.u32(e.child_slot);
          }
          w.u32(static_cast<std::uint32_t>(alt.children.size()));
          for (const NodePtr& child : alt.children) write_node(w, *child);
        }
      },
      node.node);
}

NodePtr read_node(Reader& r) {
  const std::uint8_t tag = r.u8();
  auto node = std::make_unique<IndexNode>();
  switch (tag) {
    case kLeafStore: {
      LeafStore leaf;
      leaf.point_id = r.u32();
      leaf.members = r.vec_u32();
      node->node = std::move(leaf);
      break;
    }
    case kLeafBruteForce: {
      LeafBruteForce leaf;
      leaf.ids = r.vec_u32();
      node->node = std::move(leaf);
      break;
    }
    case kLeafBaseLSH: {
      LeafBaseLSH leaf;
      leaf.spherical = r.u8() != 0;
      leaf.dim = r.u32();
      leaf.r1 = r.f64();
      leaf.r2 = r.f64();
      if (leaf.spherical) {
        leaf.frame.center = r.vec_f64();
        leaf.frame.radius = r.f64();
        leaf.T = r.u32();
        leaf.threshold = r.f64();
      } else {
        leaf.k = r.u32();
        leaf.width = r.f64();
      }
      const std::uint32_t ntables = r.u32();
      for (std::uint32_t t = 0; t < ntables; ++t) {
        BaseLshTable table;
        table.seed = r.u64();
        const std::uint32_t nb = r.u32();
        for (std::uint32_t b = 0; b < nb; ++b) {
          if (leaf.spherical) {
            const std::uint64_t key = r.u64();
            table.sph_buckets.push_back({key, r.vec_u32()});
          } else {
            GridKey key = read_grid_key(r);
            table.grid_buckets.push_back({std::move(key), r.vec_u32()});
          }
        }
        leaf.tables.push_back(std::move(table));
      }
      node->node = std::move(leaf);
      break;
    }
    case kSphericalSplit: {
      SphericalSplit split;
      split.frame.center = r.vec_f64();
      split.frame.radius = r.f64();
      split.partition.seed = r.u64();
      split.partition.dim = r.u32();
      split.partition.T = r.u32();
      split.partition.threshold = r.f64();
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t part = r.u32();
        split.children.emplace_back(part, read_node(r));
      }
      node->node = std::move(split);
      break;
    }
    case kGridSplit: {
      GridSplit split;
      const std::uint64_t seed = r.u64();
      const std::uint32_t dim = r.u32();
      split.partition = sample_grid_partition(dim, seed);
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        GridKey key = read_grid_key(r);
        split.children.emplace_back(std::move(key), read_node(r));
      }
      node->node = std::move(split);
      break;
    }
    case kClusterSplit: {
      ClusterSplit split;
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        ClusterChild cc;
        cc.cluster.center_id = r.u32();
        cc.cluster.radius = r.f64();
        cc.cluster.members = r.vec_u32();
        cc.child = read_node(r);
        split.clusters.push_back(std::move(cc));
      }
      if (r.u8()) split.remainder = read_node(r);
      node->node = std::move(split);
      break;
    }
    case kAnnulusSplit: {
      AnnulusSplit split;
      split.center = r.vec_f64();
      split.R = r.f64();
      split.delta = r.f64();
      split.r1 = r.f64();
      split.r2 = r.f64();
      const std::uint32_t ne = r.u32();
      for (std::uint32_t i = 0; i < ne; ++i) {
        AnnulusEntry e;
        e.i = r.u32();
        e.j = r.u32();
        e.r1p = r.f64();
        e.r2p = r.f64();
        e.child_slot = r.u32();
        split.entries.push_back(e);
      }
      const std::uint32_t nc = r.u32();
      for (std::uint32_t i = 0; i < nc; ++i) split.children.push_back(read_node(r));
      node->node = std::move(split);
      break;
    }
    default:
      throw std::runtime_error("forest file: unknown node tag");
  }
  return node;
}

constexpr char kMagic[4] = {'S', 'A', 'N', 'N'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_forest(const Forest& forest) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  const BuildParams& p = forest.params;
  w.f64(p.c);
  w.f64(p.r);
  w.f64(p.eps);
  w.f64(p.delta);
  w.f64(p.tau);
  w.u32(p.leaf_cutoff);
  w.u32(p.max_ball_depth);
  w.u32(p.max_run_length);
  w.u32(p.sample_threshold);
  w.u32(p.cluster_floor);
  w.u32(p.d_target);
  w.u64(p.seed);
  w.u32(forest.meta.orig_dim);
  w.u32(forest.meta.indexed_dim);
  w.f64(forest.meta.scale);
  w.u64(forest.meta.jl_seed);
  const auto pts = forest.store.all();
  w.u32(static_cast<std::uint32_t>(pts.size()));
  for (const Point& pt : pts) {
    w.u32(pt.id);
    for (double x : pt.coords) w.f64(x);
  }
  // verification-space copy, omitted when it equals the indexed points
  const bool separate = forest.meta.jl_seed != 0 &&
                        forest.meta.indexed_dim < forest.meta.orig_dim;
  w.u8(separate ? 1 : 0);
  if (separate) {
    const auto vpts = forest.verify.all();
    w.u32(static_cast<std::uint32_t>(vpts.size()));
    for (const Point& pt : vpts) {
      w.u32(pt.id);
      for (double x : pt.coords) w.f64(x);
    }
  }
  w.u32(static_cast<std::uint32_t>(forest.trees.size()));
  for (const NodePtr& tree : forest.trees) write_node(w, *tree);
  return std::move(w.out);
}

Forest deserialize_forest(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  char magic[4];
  r.need(4);
  std::memcpy(magic, bytes.data(), 4);
  r.pos = 4;
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("forest file: bad magic");
  if (r.u16() != kVersion) throw std::runtime_error("forest file: unsupported version");
  Forest f;
  BuildParams& p = f.params;
  p.c = r.f64();
  p.r = r.f64();
  p.eps = r.f64();
  p.delta = r.f64();
  p.tau = r.f64();
  p.leaf_cutoff = r.u32();
  p.max_ball_depth = r.u32();
  p.max_run_length = r.u32();
  p.sample_threshold = r.u32();
  p.cluster_floor = r.u32();
  p.d_target = r.u32();
  p.seed = r.u64();
  f.meta.orig_dim = r.u32();
  f.meta.indexed_dim = r.u32();
  f.meta.scale = r.f64();
  f.meta.jl_seed = r.u64();
  const std::uint32_t n = r.u32();
  std::vector<Point> pts(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    pts[i].id = r.u32();
    pts[i].coords.resize(f.meta.indexed_dim);
    for (double& x : pts[i].coords) x = r.f64();
  }
  if (r.u8()) {
    const std::uint32_t nv = r.u32();
    std::vector<Point> vpts(nv);
    for (std::uint32_t i = 0; i < nv; ++i) {
      vpts[i].id = r.u32();
      vpts[i].coords.resize(f.meta.orig_dim);
      for (double& x : vpts[i].coords) x = r.f64();
    }
    f.verify = PointStore(std::move(vpts));
  } else {
    f.verify = PointStore(std::vector<Point>(pts.begin(), pts.end()));
  }
  f.store = PointStore(std::move(pts));
  const std::uint32_t ntrees = r.u32();
  for (std::uint32_t t = 0; t < ntrees; ++t) f.trees.push_back(read_node(r));
  if (r.pos != bytes.size()) throw std::runtime_error("forest file: trailing bytes");
  return f;
}

void save_forest(const Forest& forest, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize_forest(forest);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_forest: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("save_forest: write failed");
}

Forest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_forest: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_forest(bytes);
}

}  // namespace sann
