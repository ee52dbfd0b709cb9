/**
 * Wire format shared with the engine: each frame is a 4-byte big-endian
 * length prefix followed by that many bytes of UTF-8 JSON encoding one
 * message object with exactly the fields
 * `{height, id, payload, session, type, width}`.
 *
 * Serialization is canonical — keys sorted alphabetically at every level,
 * no whitespace — so a message always produces the same bytes.  The golden
 * fixtures under `../fixtures/protocol/` pin this byte-for-byte.
 */

export const PROTOCOL_VERSION = 1;

export const MESSAGE_TYPES = [
  "INIT",
  "READY",
  "DETECT",
  "PROPAGATE",
  "ESTIMATE",
  "RESULT",
  "ERROR",
  "SHUTDOWN",
] as const;

export type MessageType = (typeof MESSAGE_TYPES)[number];

export interface Message {
  id: number;
  type: MessageType;
  session: string;
  width: number;
  height: number;
  payload: unknown;
}

export class ProtocolError extends Error {}

/** Recursively sort object keys so JSON.stringify emits canonical bytes. */
function canonicalize(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(canonicalize);
  }
  if (value !== null && typeof value === "object") {
    const sorted: Record<string, unknown> = {};
    for (const key of Object.keys(value as Record<string, unknown>).sort()) {
      sorted[key] = canonicalize((value as Record<string, unknown>)[key]);
    }
    return sorted;
  }
  return value;
}

export function encodeMessage(message: Message): Buffer {
  const body = Buffer.from(
    JSON.stringify(
      canonicalize({
        height: message.height,
        id: message.id,
        payload: message.payload ?? null,
        session: message.session,
        type: message.type,
        width: message.width,
      }),
    ),
    "utf8",
  );
  const frame = Buffer.alloc(4 + body.length);
  frame.writeUInt32BE(body.length, 0);
  body.copy(frame, 4);
  return frame;
}

export function decodeBody(body: Buffer): Message {
  let parsed: unknown;
  try {
    parsed = JSON.parse(body.toString("utf8"));
  } catch (err) {
    throw new ProtocolError(`malformed message body: ${String(err)}`);
  }
  if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
    throw new ProtocolError("message body must be a JSON object");
  }
  const obj = parsed as Record<string, unknown>;
  for (const field of ["id", "type", "session", "width", "height", "payload"]) {
    if (!(field in obj)) {
      throw new ProtocolError(`message missing field: ${field}`);
    }
  }
  if (!MESSAGE_TYPES.includes(obj.type as MessageType)) {
    throw new ProtocolError(`unknown message type ${JSON.stringify(obj.type)}`);
  }
  return {
    id: Number(obj.id),
    type: obj.type as MessageType,
    session: String(obj.session),
    width: Number(obj.width),
    height: Number(obj.height),
    payload: obj.payload,
  };
}

/**
 * Incremental splitter for the length-prefixed stream.  Push chunks as
 * they arrive; `next()` yields one complete body at a time.
 */
export class FrameReader {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): void {
    this.buffer = this.buffer.length === 0 ? chunk : Buffer.concat([this.buffer, chunk]);
  }

  next(): Buffer | null {
    if (this.buffer.length < 4) {
      return null;
    }
    const length = this.buffer.readUInt32BE(0);
    if (this.buffer.length < 4 + length) {
      return null;
    }
    const body = this.buffer.subarray(4, 4 + length);
    this.buffer = this.buffer.subarray(4 + length);
    return body;
  }

  /** Bytes left over after the stream ended; nonzero means truncation. */
  pending(): number {
    return this.buffer.length;
  }
}

/** Best-effort id extraction from a body that failed full decoding. */
export function salvageId(body: Buffer): number {
  const text = body.toString("utf8");
  try {
    const parsed = JSON.parse(text);
    if (parsed && typeof parsed === "object" && typeof parsed.id === "number") {
      return parsed.id;
    }
  } catch {
    // not valid JSON (truncated frame, typically): scrape the id field
    const match = text.match(/"id"\s*:\s*(-?\d+)/);
    if (match) {
      return Number(match[1]);
    }
  }
  return -1;
}
