from .keys import (KeyReuseWarning, bits_to_symbols, otp_decrypt, otp_encrypt, shared_shuffle,
                   shared_unshuffle, symbols_to_bits)
from .session import (Phase, PartyState, PulseRecords, SessionAborted, SessionParams, SessionResult, Seeds,
                      SiftedKey, alice_emit_pulse, run_session, sift)
from .transport import InProcTransport, TcpTransport, TransportError, tcp_pair
from .wire import Message, MessageType

__all__ = [
    "InProcTransport", "KeyReuseWarning", "Message", "MessageType", "PartyState", "Phase", "PulseRecords",
    "SessionAborted", "SessionParams", "SessionResult", "Seeds", "SiftedKey", "TcpTransport", "TransportError",
    "alice_emit_pulse", "bits_to_symbols", "otp_decrypt", "otp_encrypt", "run_session", "shared_shuffle",
    "shared_unshuffle", "sift", "symbols_to_bits", "tcp_pair",
]
