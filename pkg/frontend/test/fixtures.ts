import { readFileSync } from "node:fs";

export interface Recorded<T> {
  status: number;
  version: string;
  body: T;
}

/** Load a response recorded from the real service. */
export function fixture<T>(name: string): Recorded<T> {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as Recorded<T>;
}
