"""近/远距离隐蔽信道"""

from .channel import (
    BIT_READY, ChannelConfig, ChannelStats, bits_to_bytes, payload_bits, payload_sweep,
    predicted_cycles_per_bit, prepare_channel_machine, recv_bit, run_channel, send_bit,
)

__all__ = [
    'BIT_READY', 'ChannelConfig', 'ChannelStats', 'bits_to_bytes', 'payload_bits', 'payload_sweep',
    'predicted_cycles_per_bit', 'prepare_channel_machine', 'recv_bit', 'run_channel', 'send_bit',
]
