/**
 * Single-threaded request loop for an external backend worker.
 *
 * `serve(handlers)` reads framed messages from stdin, answers READY to the
 * INIT handshake, dispatches DETECT / PROPAGATE / ESTIMATE to the
 * registered handlers, and exits on SHUTDOWN (or end of input).  Requests
 * are answered strictly in arrival order — exactly one RESULT or ERROR per
 * request id — which is what lets the engine chain propagation calls
 * through a session.
 *
 * Session state lives worker-side in a table keyed by the request's
 * session id.  A memory-bank propagator keeps whatever it likes in its
 * session slot; `onSessionTeardown` runs for every live session at
 * shutdown.  Handler exceptions turn into ERROR replies and the loop
 * keeps running; malformed frames get an ERROR with whatever id could be
 * salvaged from the broken body.
 */

import type { Readable, Writable } from "node:stream";

import {
  FrameReader,
  Message,
  PROTOCOL_VERSION,
  ProtocolError,
  decodeBody,
  encodeMessage,
  salvageId,
} from "./framing.js";
import {
  MaskRaster,
  RgbRaster,
  decodeMask,
  decodeRgb,
  encodeMask,
} from "./rasters.js";

export interface DetectRequest {
  frame: RgbRaster;
}

export interface PropagateRequest<S> {
  referenceFrame: RgbRaster;
  referenceMask: MaskRaster;
  targetFrame: RgbRaster;
  session: S;
}

export interface EstimateRequest {
  frame: RgbRaster;
  mask: MaskRaster;
}

export interface Handlers<S = unknown> {
  detect?: (request: DetectRequest) => MaskRaster;
  propagate?: (request: PropagateRequest<S>) => MaskRaster;
  estimate?: (request: EstimateRequest) => number;
  /** Called the first time a session id appears; its return value is the
   * session state handed to every propagate call in that session. */
  onSessionSetup?: (sessionId: string) => S;
  onSessionTeardown?: (sessionId: string, state: S) => void;
}

export interface ServeOptions {
  input?: Readable;
  output?: Writable;
  /** Advertised in READY; this loop is single-threaded, so false. */
  parallel?: boolean;
  /** Override the version announced in READY (conformance testing only). */
  protocolVersion?: number;
}

export async function serve<S>(
  handlers: Handlers<S>,
  options: ServeOptions = {},
): Promise<void> {
  const input = options.input ?? process.stdin;
  const output = options.output ?? process.stdout;
  const version = options.protocolVersion ?? PROTOCOL_VERSION;
  const sessions = new Map<string, S>();
  const reader = new FrameReader();

  const send = (message: Message) => {
    output.write(encodeMessage(message));
  };
  const sendError = (request: Pick<Message, "id" | "session">, detail: string) => {
    send({
      id: request.id,
      type: "ERROR",
      session: request.session,
      width: 0,
      height: 0,
      payload: { message: detail },
    });
  };

  for await (const chunk of input) {
    reader.push(chunk as Buffer);
    for (let body = reader.next(); body !== null; body = reader.next()) {
      let message: Message;
      try {
        message = decodeBody(body);
      } catch (err) {
        sendError({ id: salvageId(body), session: "" }, String(err));
        continue;
      }

      if (message.type === "SHUTDOWN") {
        teardown(sessions, handlers);
        return;
      }
      try {
        const reply = dispatch(message, handlers, sessions, version);
        send(reply);
      } catch (err) {
        sendError(message, err instanceof Error ? err.message : String(err));
      }
    }
  }
  teardown(sessions, handlers);
}

function dispatch<S>(
  message: Message,
  handlers: Handlers<S>,
  sessions: Map<string, S>,
  version: number,
): Message {
  const payload = (message.payload ?? {}) as Record<string, unknown>;
  switch (message.type) {
    case "INIT":
      return {
        id: message.id,
        type: "READY",
        session: message.session,
        width: 0,
        height: 0,
        payload: { parallel: false, protocol_version: version },
      };
    case "DETECT": {
      if (!handlers.detect) {
        throw new ProtocolError("no detect handler registered");
      }
      const frame = decodeRgb(
        requireString(payload, "frame"),
        message.height,
        message.width,
      );
      const mask = handlers.detect({ frame });
      return maskResult(message, mask);
    }
    case "PROPAGATE": {
      if (!handlers.propagate) {
        throw new ProtocolError("no propagate handler registered");
      }
      if (!sessions.has(message.session)) {
        sessions.set(
          message.session,
          handlers.onSessionSetup
            ? handlers.onSessionSetup(message.session)
            : (undefined as S),
        );
      }
      const mask = handlers.propagate({
        referenceFrame: decodeRgb(
          requireString(payload, "reference_frame"),
          message.height,
          message.width,
        ),
        referenceMask: decodeMask(
          requireString(payload, "reference_mask"),
          message.height,
          message.width,
        ),
        targetFrame: decodeRgb(
          requireString(payload, "target_frame"),
          message.height,
          message.width,
        ),
        session: sessions.get(message.session) as S,
      });
      return maskResult(message, mask);
    }
    case "ESTIMATE": {
      if (!handlers.estimate) {
        throw new ProtocolError("no estimate handler registered");
      }
      const value = handlers.estimate({
        frame: decodeRgb(
          requireString(payload, "frame"),
          message.height,
          message.width,
        ),
        mask: decodeMask(
          requireString(payload, "mask"),
          message.height,
          message.width,
        ),
      });
      return {
        id: message.id,
        type: "RESULT",
        session: message.session,
        width: 0,
        height: 0,
        payload: { value },
      };
    }
    default:
      throw new ProtocolError(`unsupported request type ${message.type}`);
  }
}

function maskResult(request: Message, mask: MaskRaster): Message {
  return {
    id: request.id,
    type: "RESULT",
    session: request.session,
    width: mask.width,
    height: mask.height,
    payload: { mask: encodeMask(mask) },
  };
}

function requireString(payload: Record<string, unknown>, field: string): string {
  const value = payload[field];
  if (typeof value !== "string") {
    throw new ProtocolError(`payload field ${field} missing or not a string`);
  }
  return value;
}

function teardown<S>(sessions: Map<string, S>, handlers: Handlers<S>): void {
  if (handlers.onSessionTeardown) {
    for (const [id, state] of sessions) {
      handlers.onSessionTeardown(id, state);
    }
  }
  sessions.clear();
}
