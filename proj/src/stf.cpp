#include "panseg/stf.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace panseg::stf {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'F', '1'};

void put_u16(std::ostream& os, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

void put_u32(std::ostream& os, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}


std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return is;
}

void write_header(std::ostream& os, Dtype dtype, Tag tag, uint32_t h, uint32_t w, uint32_t c) {
    os.write(kMagic, 4);
    char d = static_cast<char>(dtype), t = static_cast<char>(tag);
    os.write(&d, 1);
    os.write(&t, 1);
    put_u16(os, 0);  // reserved
    put_u32(os, h);
    put_u32(os, w);
    put_u32(os, c);
}

Header read_header(std::istream& is, const std::filesystem::path& path) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("not an STF file (bad magic): " + path.string());
    char d, t;
    is.read(&d, 1);
    is.read(&t, 1);
    uint16_t reserved = get_u16(is);
    Header hdr{static_cast<Dtype>(d), static_cast<Tag>(t), get_u32(is), get_u32(is), get_u32(is)};
    if (!is) throw FormatError("truncated STF header: " + path.string());
    if (d > 3) throw FormatError("unknown dtype code in " + path.string());
    if (t > 6) throw FormatError("unknown semantic tag in " + path.string());
    if (reserved != 0) throw FormatError("nonzero reserved field in " + path.string());
    return hdr;
}

template <typename T>
void write_payload(std::ostream& os, const std::vector<T>& data) {
    // Little-endian host assumed (x86/aarch64-le); payload written verbatim.
    static_assert(sizeof(T) <= 4);
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_payload(std::istream& is, size_t n, const std::filesystem::path& path) {
    std::vector<T> data(n);
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!is) throw FormatError("truncated STF payload: " + path.string());
    return data;
}

Header expect(const std::filesystem::path& path, std::istream& is, Dtype dtype, Tag tag,
              int channels) {
    Header hdr = read_header(is, path);
    if (hdr.dtype != dtype)
        throw FormatError("unexpected dtype (want code " +
                          std::to_string(static_cast<int>(dtype)) + ") in " + path.string());
    if (hdr.tag != tag)
        throw FormatError("unexpected semantic tag (want " +
                          std::to_string(static_cast<int>(tag)) + ", got " +
                          std::to_string(static_cast<int>(hdr.tag)) + ") in " + path.string());
    if (channels > 0 && hdr.channels != static_cast<uint32_t>(channels))
        throw FormatError("unexpected channel count in " + path.string());
    return hdr;
}

}  // namespace

Header peek(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_header(is, path);
}

void write_tensor(const SemanticProbMap& m, const std::filesystem::path& path) {
    validate(m);
    auto os = open_out(path);
    write_header(os, Dtype::F32, Tag::SemanticProbs, m.height, m.width, m.channels);
    write_payload(os, m.probs);
    if (!os) throw IoError("write failed: " + path.string());
}

void write_tensor(const SemanticLabelMap& m, const std::filesystem::path& path) {
    auto os = open_out(path);
    write_header(os, Dtype::U16, Tag::Labels, m.height, m.width, 1);
    write_payload(os, m.labels);
    if (!os) throw IoError("write failed: " + path.string());
}

void write_tensor(const ContourProbMap& m, const std::filesystem::path& path) {
    validate(m);
    auto os = open_out(path);
    write_header(os, Dtype::F32, Tag::ContourProbs, m.height, m.width, 1);
    write_payload(os, m.probs);
    if (!os) throw IoError("write failed: " + path.string());
}

void write_tensor(const BinaryMask& m, const std::filesystem::path& path) {
    auto os = open_out(path);
    write_header(os, Dtype::U8, Tag::ContourMask, m.height, m.width, 1);
    write_payload(os, m.mask);
    if (!os) throw IoError("write failed: " + path.string());
}

void write_tensor(const OffsetField& m, const std::filesystem::path& path) {
    validate(m);
    auto os = open_out(path);
    write_header(os, Dtype::F32, Tag::Offsets, m.height, m.width, 2);
    write_payload(os, m.offsets);
    if (!os) throw IoError("write failed: " + path.string());
}

void write_tensor(const InstanceLabelMap& m, const std::filesystem::path& path) {
    auto os = open_out(path);
    write_header(os, Dtype::U32, Tag::InstanceIds, m.height, m.width, 1);
    write_payload(os, m.ids);
    if (!os) throw IoError("write failed: " + path.string());
}

void write_tensor(const PanopticMap& m, const std::filesystem::path& path) {
    size_t n = static_cast<size_t>(m.height) * m.width;
    std::vector<uint32_t> enc(n);
    for (size_t i = 0; i < n; ++i) {
        if (m.instance_ids[i] >= PanopticMap::kEncodeBase)
            throw ValidationError("panoptic: instance id " + std::to_string(m.instance_ids[i]) +
                                  " >= 1000 cannot be encoded");
        enc[i] = m.encoded(i);
    }
    auto os = open_out(path);
    write_header(os, Dtype::U32, Tag::PanopticEncoded, m.height, m.width, 1);
    write_payload(os, enc);
    if (!os) throw IoError("write failed: " + path.string());
}

SemanticProbMap read_semantic_probs(const std::filesystem::path& path) {
    auto is = open_in(path);
    Header hdr = expect(path, is, Dtype::F32, Tag::SemanticProbs, 0);
    SemanticProbMap m{static_cast<int>(hdr.height), static_cast<int>(hdr.width),
                      static_cast<int>(hdr.channels), {}};
    m.probs = read_payload<float>(is, static_cast<size_t>(hdr.height) * hdr.width * hdr.channels,
                                  path);
    validate(m);
    return m;
}

SemanticLabelMap read_labels(const std::filesystem::path& path) {
    auto is = open_in(path);
    Header hdr = expect(path, is, Dtype::U16, Tag::Labels, 1);
    SemanticLabelMap m{static_cast<int>(hdr.height), static_cast<int>(hdr.width), {}};
    m.labels = read_payload<uint16_t>(is, static_cast<size_t>(hdr.height) * hdr.width, path);
    return m;
}

ContourProbMap read_contour_probs(const std::filesystem::path& path) {
    auto is = open_in(path);
    Header hdr = expect(path, is, Dtype::F32, Tag::ContourProbs, 1);
    ContourProbMap m{static_cast<int>(hdr.height), static_cast<int>(hdr.width), {}};
    m.probs = read_payload<float>(is, static_cast<size_t>(hdr.height) * hdr.width, path);
    validate(m);
    return m;
}

BinaryMask read_contour_mask(const std::filesystem::path& path) {
    auto is = open_in(path);
    Header hdr = expect(path, is, Dtype::U8, Tag::ContourMask, 1);
    BinaryMask m{static_cast<int>(hdr.height), static_cast<int>(hdr.width), {}};
    m.mask = read_payload<uint8_t>(is, static_cast<size_t>(hdr.height) * hdr.width, path);
    for (auto& v : m.mask)
        if (v > 1) throw ValidationError("contour_mask: non-boolean value " + std::to_string(v));
    return m;
}

OffsetField read_offsets(const std::filesystem::path& path) {
    auto is = open_in(path);
    Header hdr = expect(path, is, Dtype::F32, Tag::Offsets, 2);
    OffsetField m{static_cast<int>(hdr.height), static_cast<int>(hdr.width), {}};
    m.offsets = read_payload<float>(is, static_cast<size_t>(hdr.height) * hdr.width * 2, path);
    validate(m);
    return m;
}

InstanceLabelMap read_instances(const std::filesystem::path& path) {
    auto is = open_in(path);
    Header hdr = expect(path, is, Dtype::U32, Tag::InstanceIds, 1);
    InstanceLabelMap m{static_cast<int>(hdr.height), static_cast<int>(hdr.width), {}, {}};
    m.ids = read_payload<uint32_t>(is, static_cast<size_t>(hdr.height) * hdr.width, path);
    rebuild_geometry(m);
    return m;
}

PanopticMap read_panoptic(const std::filesystem::path& path) {
    auto is = open_in(path);
    Header hdr = expect(path, is, Dtype::U32, Tag::PanopticEncoded, 1);
    size_t n = static_cast<size_t>(hdr.height) * hdr.width;
    auto enc = read_payload<uint32_t>(is, n, path);
    PanopticMap m = PanopticMap::zeros(hdr.height, hdr.width);
    for (size_t i = 0; i < n; ++i) {
        auto [cls, inst] = PanopticMap::decode(enc[i]);
        m.class_ids[i] = static_cast<uint16_t>(cls);
        m.instance_ids[i] = static_cast<uint16_t>(inst);
    }
    return m;
}

void write_records(const InstanceLabelMap& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["instances"] = nlohmann::json::array();
    for (const auto& r : m.records)
        j["instances"].push_back({{"id", r.id},
                                  {"class_id", r.class_id},
                                  {"area", r.area},
                                  {"centroid", {r.centroid_row, r.centroid_col}},
                                  {"confidence", r.confidence}});
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << j.dump(2) << "\n";
}

void read_records(InstanceLabelMap& m, const std::filesystem::path& path) {
    auto is = open_in(path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad records JSON " + path.string() + ": " + e.what());
    }
    m.records.clear();
    for (const auto& e : j.at("instances")) {
        InstanceRecord r;
        r.id = e.at("id").get<uint32_t>();
        r.class_id = e.at("class_id").get<int>();
        r.area = e.at("area").get<int64_t>();
        r.centroid_row = e.at("centroid")[0].get<double>();
        r.centroid_col = e.at("centroid")[1].get<double>();
        r.confidence = e.at("confidence").get<double>();
        m.records.push_back(r);
    }
    validate(m);
}

void write_catalog(const ClassCatalog& catalog, const std::filesystem::path& path) {
    nlohmann::json j;
    j["classes"] = nlohmann::json::array();
    for (const auto& e : catalog.classes)
        j["classes"].push_back({{"id", e.id}, {"name", e.name}, {"is_thing", e.is_thing}});
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << j.dump(2) << "\n";
}

ClassCatalog read_catalog(const std::filesystem::path& path) {
    auto is = open_in(path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad catalog JSON " + path.string() + ": " + e.what());
    }
    ClassCatalog cat;
    for (const auto& e : j.at("classes"))
        cat.classes.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                               e.at("is_thing").get<bool>()});
    cat.validate();
    return cat;
}

namespace {

void write_pgm_raw(const std::filesystem::path& path, int h, int w, uint32_t maxval,
                   const std::vector<uint32_t>& values) {
    if (maxval > 65535) throw ValidationError("pgm: values exceed 16-bit range");
    auto os = open_out(path);
    os << "P5\n" << w << " " << h << "\n" << (maxval > 255 ? 65535 : 255) << "\n";
    if (maxval > 255) {
        for (uint32_t v : values) {  // big-endian per PGM spec
            char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
            os.write(b, 2);
        }
    } else {
        for (uint32_t v : values) {
            char b = static_cast<char>(v);
            os.write(&b, 1);
        }
    }
    if (!os) throw IoError("write failed: " + path.string());
}

uint32_t max_of(const std::vector<uint32_t>& v) {
    uint32_t m = 0;
    for (auto x : v) m = std::max(m, x);
    return m;
}

}  // namespace

void write_pgm(const SemanticLabelMap& m, const std::filesystem::path& path) {
    std::vector<uint32_t> v(m.labels.begin(), m.labels.end());
    write_pgm_raw(path, m.height, m.width, max_of(v), v);
}

void write_pgm(const BinaryMask& m, const std::filesystem::path& path) {
    std::vector<uint32_t> v(m.mask.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = m.mask[i] ? 255 : 0;
    write_pgm_raw(path, m.height, m.width, 255, v);
}

void write_pgm(const InstanceLabelMap& m, const std::filesystem::path& path) {
    std::vector<uint32_t> v(m.ids.begin(), m.ids.end());
    write_pgm_raw(path, m.height, m.width, max_of(v), v);
}

SemanticLabelMap read_pgm(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError("not a binary PGM (P5): " + path.string());
    int w, h;
    long maxval;
    is >> w >> h >> maxval;
    is.get();  // single whitespace after maxval
    if (!is || w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
        throw FormatError("unsupported PGM header in " + path.string());
    SemanticLabelMap m = SemanticLabelMap::zeros(h, w);
    size_t n = static_cast<size_t>(h) * w;
    if (maxval == 255) {
        std::vector<unsigned char> buf(n);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!is) throw FormatError("truncated PGM payload: " + path.string());
        for (size_t i = 0; i < n; ++i) m.labels[i] = buf[i];
    } else {
        std::vector<unsigned char> buf(n * 2);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
        if (!is) throw FormatError("truncated PGM payload: " + path.string());
        for (size_t i = 0; i < n; ++i)
            m.labels[i] = static_cast<uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
    return m;
}

void write_debug_ppm(const PanopticMap& m, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << "P6\n" << m.width << " " << m.height << "\n255\n";
    size_t n = static_cast<size_t>(m.height) * m.width;
    for (size_t i = 0; i < n; ++i) {
        uint32_t e = m.encoded(i);
        // splitmix-style hash keeps colors stable across runs
        uint64_t x = e + 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        x ^= x >> 31;
        char rgb[3] = {static_cast<char>(x & 0xff), static_cast<char>((x >> 8) & 0xff),
                       static_cast<char>((x >> 16) & 0xff)};
        os.write(rgb, 3);
    }
    if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace panseg::stf
