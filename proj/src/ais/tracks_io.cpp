#include "aistk/ais/tracks_io.hpp"

#include <fstream>
#include <sstream>

#include "aistk/binio.hpp"
#include "aistk/errors.hpp"

namespace aistk {

namespace {

constexpr const char* kTracksHeader = "track_id,mmsi,timestamp,lat,lon,sog,cog,type,anomaly";
constexpr const char* kMessagesHeader = "mmsi,timestamp,lat,lon,sog,cog,vessel_type";

void check_field(const std::string& s, const char* what) {
    if (s.find_first_of(",\n\r") != std::string::npos)
        throw FormatError(std::string(what) + " contains a delimiter: " + s);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

void save_tracks(const std::vector<Track>& tracks, std::ostream& os) {
    os << kTracksHeader << "\n";
    for (const Track& tr : tracks) {
        check_field(tr.id, "track id");
        check_field(tr.anomaly, "anomaly tag");
        for (const AisMessage& m : tr.messages) {
            os << tr.id << ',' << m.mmsi << ',' << m.timestamp << ',' << fmt_g17(m.lat) << ','
               << fmt_g17(m.lon) << ',' << fmt_g17(m.sog) << ',' << fmt_g17(m.cog) << ','
               << (m.vessel_type ? vessel_type_name(*m.vessel_type) : "") << ',' << tr.anomaly
               << "\n";
        }
    }
}

void save_tracks(const std::vector<Track>& tracks, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    save_tracks(tracks, os);
    if (!os) throw IoError("failed writing: " + path.string());
}

std::vector<Track> load_tracks(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("track file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTracksHeader)
        throw FormatError("track file header mismatch, expected: " + std::string(kTracksHeader));

    std::vector<Track> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_commas(line);
        if (f.size() != 9)
            throw FormatError("track file line " + std::to_string(lineno) + ": expected 9 fields");
        AisMessage m;
        m.mmsi = parse_int(f[1], "mmsi");
        m.timestamp = parse_int(f[2], "timestamp");
        m.lat = parse_double(f[3], "lat");
        m.lon = parse_double(f[4], "lon");
        m.sog = parse_double(f[5], "sog");
        m.cog = parse_double(f[6], "cog");
        if (!f[7].empty()) {
            auto vt = vessel_type_from_name(f[7]);
            if (!vt)
                throw FormatError("track file line " + std::to_string(lineno) +
                                  ": unknown vessel type " + f[7]);
            m.vessel_type = vt;
        }
        if (out.empty() || out.back().id != f[0]) {
            Track tr;
            tr.id = f[0];
            tr.mmsi = m.mmsi;
            tr.anomaly = f[8];
            out.push_back(std::move(tr));
        }
        out.back().messages.push_back(m);
    }
    return out;
}

std::vector<Track> load_tracks(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open track file: " + path.string());
    return load_tracks(is);
}

void save_messages(const std::vector<Track>& tracks, std::ostream& os) {
    os << kMessagesHeader << "\n";
    for (const Track& tr : tracks)
        for (const AisMessage& m : tr.messages)
            os << m.mmsi << ',' << m.timestamp << ',' << fmt_g17(m.lat) << ',' << fmt_g17(m.lon)
               << ',' << fmt_g17(m.sog) << ',' << fmt_g17(m.cog) << ','
               << (m.vessel_type ? vessel_type_name(*m.vessel_type) : "") << "\n";
}

void save_messages(const std::vector<Track>& tracks, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    save_messages(tracks, os);
    if (!os) throw IoError("failed writing: " + path.string());
}

}  // namespace aistk
