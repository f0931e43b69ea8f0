// WebSocket protocol client with request/response correlation. Pure of DOM
// concerns so the same class drives the browser console and the node tests.

import { Message, decode, encode, hello } from "./protocol";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "open" | "message" | "close" | "error", handler: (event: any) => void): void;
}

export type MessageHandler = (msg: Message) => void;

export class ProtocolError extends Error {
  constructor(public code: string, public humanText: string) {
    super(`${code}: ${humanText}`);
  }
}

export class ConsoleClient {
  private nextId = 1;
  private pending = new Map<number, { resolve: MessageHandler; reject: (err: Error) => void }>();
  private handlers = new Map<string, MessageHandler[]>();
  private socket: SocketLike;
  closed = false;

  constructor(socket: SocketLike, clientName: string) {
    this.socket = socket;
    socket.addEventListener("message", (event) => {
      const text = typeof event.data === "string" ? event.data : event.data.toString();
      this.dispatch(decode(text));
    });
    socket.addEventListener("close", () => {
      this.closed = true;
      for (const { reject } of this.pending.values()) {
        reject(new Error("connection closed"));
      }
      this.pending.clear();
    });
    this.socket.send(encode(hello(clientName)));
  }

  static connect(
    url: string,
    clientName: string,
    makeSocket: (url: string) => SocketLike = (u) => new WebSocket(u) as unknown as SocketLike,
  ): Promise<ConsoleClient> {
    return new Promise((resolve, reject) => {
      const socket = makeSocket(url);
      socket.addEventListener("open", () => resolve(new ConsoleClient(socket, clientName)));
      socket.addEventListener("error", (event) => reject(new Error(String(event?.message ?? "socket error"))));
    });
  }

  private dispatch(msg: Message): void {
    if (msg.id !== undefined && this.pending.has(msg.id)) {
      const waiter = this.pending.get(msg.id)!;
      this.pending.delete(msg.id);
      if (msg.type === "error") {
        const body = msg.body as { code?: string; human_text?: string };
        waiter.reject(new ProtocolError(body.code ?? "error", body.human_text ?? ""));
      } else {
        waiter.resolve(msg);
      }
      // streamed follow-ups with the same id still reach subscribers below
    }
    for (const handler of this.handlers.get(msg.type) ?? []) handler(msg);
    for (const handler of this.handlers.get("*") ?? []) handler(msg);
  }

  on(type: string, handler: MessageHandler): void {
    const list = this.handlers.get(type) ?? [];
    list.push(handler);
    this.handlers.set(type, list);
  }

  publish(type: string, body: Record<string, unknown> = {}): void {
    this.socket.send(encode({ type, body }));
  }

  request(type: string, body: Record<string, unknown> = {}, timeoutMs = 30000): Promise<Message> {
    const id = this.nextId++;
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending.delete(id);
        reject(new Error(`${type} timed out`));
      }, timeoutMs);
      this.pending.set(id, {
        resolve: (msg) => {
          clearTimeout(timer);
          resolve(msg);
        },
        reject: (err) => {
          clearTimeout(timer);
          reject(err);
        },
      });
      this.socket.send(encode({ type, id, body }));
    });
  }

  close(): void {
    this.closed = true;
    this.socket.close();
  }
}
