"""
From messages to classified events and durations
=================================================

A handful of ADD / EXECUTE / CANCEL messages are replayed through the order
book. Each message becomes an ORDER, TRADE or CANCEL with a best-level flag,
and trades and cancels carry the lifetime of the order they touched.
"""

# %%
import io

from lobfractal import Side, Variable, parse_csv_log, replay_day
from lobfractal.durations import extract_series

log = """timestamp,event_type,order_id,side,price,quantity
34200000,ADD,1,BID,100,50
34200100,ADD,2,ASK,102,30
34200250,EXECUTE,2,ASK,102,30
34200500,CANCEL,1,BID,100,50
34200600,ADD,3,BID,99,10
34200600,ADD,4,BID,99,20
"""
events = parse_csv_log(io.StringIO(log))

# %%
# Replay from an empty book.
for e in replay_day(events):
    life = "" if e.lifetime_ms is None else f"lifetime {e.lifetime_ms} ms"
    print(f"{e.timestamp}  {e.kind.name:<6} {e.side.name}  at_best={e.at_best!s:<5} {life}")

# %%
# Duration series come straight from the classified events. Equal timestamps
# give zero durations, which are kept unless asked otherwise.
classified = replay_day(events)
print("or-or BID:", extract_series(classified, Variable.OR_OR, Side.BID).values.tolist())
print("or-or BID, zeros dropped:",
      extract_series(classified, Variable.OR_OR, Side.BID, drop_zeros=True).values.tolist())
print("or-tr ASK:", extract_series(classified, Variable.OR_TR, Side.ASK).values.tolist())
