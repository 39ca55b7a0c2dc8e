/** Trailing-edge debounce: rapid calls collapse into one invocation with the
 * latest arguments after `ms` of quiet. */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  /** run immediately with the last pending args, if any */
  flush(): void;
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;

  const call = (...args: A) => {
    pending = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const args2 = pending!;
      pending = null;
      fn(...args2);
    }, ms);
  };
  call.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  call.flush = () => {
    if (timer !== null && pending !== null) {
      clearTimeout(timer);
      timer = null;
      const args = pending;
      pending = null;
      fn(...args);
    }
  };
  return call;
}
