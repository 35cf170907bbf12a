#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace chorus {

// Ordered, bidirectional, newline-delimited stream. read_line and write_line
// may be called concurrently from one reader and one writer thread.
class LineStream {
public:
    virtual ~LineStream() = default;

    // Next line without its terminator; nullopt at end of stream. Lines longer
    // than the stream's limit come back as kOversized and the rest is skipped.
    virtual std::optional<std::string> read_line() = 0;
    virtual bool write_line(std::string_view line) = 0;
    // Unblocks a pending read_line in another thread.
    virtual void close() = 0;
};

inline const std::string kOversized = std::string("\x00oversized", 10);

// Owns a connected socket (or pipe pair) file descriptor.
class FdLineStream final : public LineStream {
public:
    explicit FdLineStream(int fd, std::size_t max_line = 1 << 16);
    ~FdLineStream() override;

    FdLineStream(const FdLineStream&) = delete;
    FdLineStream& operator=(const FdLineStream&) = delete;

    std::optional<std::string> read_line() override;
    bool write_line(std::string_view line) override;
    void close() override;

private:
    int fd_;
    std::size_t max_line_;
    std::string buffer_;
    bool eof_ = false;
};

// Connected pair of streams over socketpair(2).
std::pair<std::unique_ptr<FdLineStream>, std::unique_ptr<FdLineStream>> make_stream_pair();

// Blocking TCP connect; throws std::system_error.
std::unique_ptr<FdLineStream> connect_tcp(const std::string& host, int port);

}  // namespace chorus
