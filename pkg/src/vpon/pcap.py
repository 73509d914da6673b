"""Nanosecond-resolution PCAP writer (link type Ethernet)."""

import struct

from .errors import IoFailure

PCAP_NS_MAGIC = 0xA1B23C4D
LINKTYPE_ETHERNET = 1
SNAPLEN = 0xFFFF

_GLOBAL = struct.Struct("<IHHiIII")
_RECORD = struct.Struct("<IIII")


class PcapWriter:
    """Writes one PCAP record per call to :meth:`append`.

    Accepts either a path or a binary stream. Single writer; callers
    serialize access.
    """

    def __init__(self, sink):
        self._owned = isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__")
        try:
            self._out = open(sink, "wb") if self._owned else sink
            self._out.write(_GLOBAL.pack(PCAP_NS_MAGIC, 2, 4, 0, 0, SNAPLEN, LINKTYPE_ETHERNET))
        except OSError as e:
            raise IoFailure(str(e)) from e
        self.records = 0

    def append(self, data, ts_ns):
        if ts_ns < 0:
            raise ValueError("negative timestamp")
        sec, nsec = divmod(int(ts_ns), 1_000_000_000)
        caplen = min(len(data), SNAPLEN)
        try:
            self._out.write(_RECORD.pack(sec, nsec, caplen, len(data)))
            self._out.write(data[:caplen])
        except (OSError, ValueError) as e:
            raise IoFailure(str(e)) from e
        self.records += 1

    def close(self):
        if self._owned and not self._out.closed:
            self._out.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def pcap_append(writer, data, ts_ns):
    writer.append(data, ts_ns)
